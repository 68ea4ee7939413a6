//! On-disk kernel cache: a JSON sidecar plus a row-major CSV payload.
//!
//! Loading verifies the vertex-ordering checksum against the ball the caller
//! supplies and refuses to return a kernel built for a different ordering.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::calculus::fmt17;
use crate::cayley::Ball;
use crate::error::{Error, Result};
use crate::linalg::Mat;

use super::{KernelMeta, KernelMethod, RieszKernel};

/// File stem shared by the sidecar and the payload.
pub fn stem(ball: &Ball, alpha: f64, method: KernelMethod) -> String {
    let group = ball.spec().to_string().replace(':', "");
    format!("kernel_{group}_r{}_a{}_{}", ball.radius(), fmt_alpha(alpha), method.label())
}

fn fmt_alpha(a: f64) -> String {
    format!("{a}").replace('.', "p")
}

pub fn paths(dir: &Path, ball: &Ball, alpha: f64, method: KernelMethod) -> (PathBuf, PathBuf) {
    let s = stem(ball, alpha, method);
    (dir.join(format!("{s}.json")), dir.join(format!("{s}.csv")))
}

pub fn save(kernel: &RieszKernel, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let (meta_path, data_path) = paths(dir, kernel.domain(), kernel.alpha(), kernel.method());
    let mut w = BufWriter::new(File::create(&data_path)?);
    let m = kernel.matrix();
    let mut line = String::new();
    for i in 0..m.rows() {
        line.clear();
        for j in 0..m.cols() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&fmt17(m[(i, j)]));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    std::fs::write(&meta_path, serde_json::to_string_pretty(kernel.meta())?)?;
    Ok((meta_path, data_path))
}

/// Load a cached kernel for `ball`; `Ok(None)` when no cache file exists.
pub fn load(dir: &Path, ball: &Arc<Ball>, alpha: f64, method: KernelMethod) -> Result<Option<RieszKernel>> {
    let (meta_path, data_path) = paths(dir, ball, alpha, method);
    if !meta_path.exists() {
        return Ok(None);
    }
    let meta: KernelMeta = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)?;
    let checksum = ball.checksum();
    if meta.checksum != checksum {
        return Err(Error::Cache(format!(
            "{} was built for vertex ordering {}, ball has {}",
            meta_path.display(),
            meta.checksum,
            checksum
        )));
    }
    if meta.group != ball.spec() || meta.radius != ball.radius() || meta.vertices != ball.len() {
        return Err(Error::Cache(format!("{} describes a different ball", meta_path.display())));
    }
    if meta.alpha != alpha || meta.method != method {
        return Err(Error::Cache(format!("{} holds different kernel parameters", meta_path.display())));
    }
    let n = ball.len();
    let mut m = Mat::zeros(n, n);
    let reader = BufReader::new(File::open(&data_path)?);
    let mut rows = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i >= n {
            return Err(Error::Cache(format!("{} has more than {n} rows", data_path.display())));
        }
        let mut cols = 0;
        for (j, tok) in line.split(',').enumerate() {
            if j >= n {
                return Err(Error::Cache(format!("row {i} has more than {n} entries")));
            }
            m[(i, j)] = tok
                .parse()
                .map_err(|_| Error::Cache(format!("row {i} column {j}: bad number `{tok}`")))?;
            cols += 1;
        }
        if cols != n {
            return Err(Error::Cache(format!("row {i} has {cols} entries, expected {n}")));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Cache(format!("{} has {rows} rows, expected {n}", data_path.display())));
    }
    Ok(Some(RieszKernel::from_parts(Arc::clone(ball), m, alpha, method)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cayley::GroupSpec;
    use crate::kernel::{riesz_kernel, spectral_decompose};

    #[test]
    fn round_trip_and_checksum_guard() {
        let dir = tempfile::tempdir().unwrap();
        let b = Ball::centered(GroupSpec::FreeAbelian(2), 3).unwrap();
        let k = riesz_kernel(&spectral_decompose(&b).unwrap(), 1.0).unwrap();
        save(&k, dir.path()).unwrap();
        let back = load(dir.path(), &b, 1.0, KernelMethod::Spectral).unwrap().unwrap();
        assert_eq!(back.matrix(), k.matrix());
        assert!(load(dir.path(), &b, 0.5, KernelMethod::Spectral).unwrap().is_none());

        let (meta_path, _) = paths(dir.path(), &b, 1.0, KernelMethod::Spectral);
        let text = std::fs::read_to_string(&meta_path).unwrap();
        std::fs::write(&meta_path, text.replace(&b.checksum(), "deadbeef")).unwrap();
        assert!(matches!(load(dir.path(), &b, 1.0, KernelMethod::Spectral), Err(Error::Cache(_))));
    }
}
