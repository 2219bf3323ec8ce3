//! Binary and CSV containers for Gram matrices, Nyström models and SVM models.
//!
//! All integers and floats are little-endian. Every file starts with four magic bytes and a
//! version byte.
//!
//! | container | layout after magic + version |
//! |-----------|------------------------------|
//! | `QKGM`    | `N: u64`, `N*N f64` row-major |
//! | `QKNY`    | `N: u64`, `m: u64`, `cutoff: f64`, `m u64` landmark indices, `N*m f64` C row-major, `m*m f64` W+ row-major |
//! | `QKSV`    | `N: u64`, `C: f64`, `bias: f64`, `jitter: f64`, `iterations: u64`, `converged: u8`, 32-byte fingerprint, then `N` records of `label: i8`, `alpha: f64` |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::GramMatrix;
use crate::nystrom::NystromModel;
use crate::svm::{SvmModel, SUPPORT_THRESHOLD};

pub const GRAM_MAGIC: &[u8; 4] = b"QKGM";
pub const NYSTROM_MAGIC: &[u8; 4] = b"QKNY";
pub const SVM_MAGIC: &[u8; 4] = b"QKSV";
pub const FORMAT_VERSION: u8 = 1;

// refuse absurd headers before allocating
const MAX_DIM: u64 = 1 << 20;

fn write_header<W: Write>(w: &mut W, magic: &[u8; 4]) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&[FORMAT_VERSION])?;
    Ok(())
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut buf = [0u8; 5];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("file too short for header".into()))?;
    if &buf[..4] != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {}",
            String::from_utf8_lossy(&buf[..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    if buf[4] != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {}", buf[4])));
    }
    Ok(())
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("unexpected end of file".into()))?;
    Ok(buf)
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

fn read_dim<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = read_u64(r)?;
    if v == 0 || v > MAX_DIM {
        return Err(Error::Format(format!("{what} = {v} out of range")));
    }
    Ok(v as usize)
}

fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut extra = [0u8; 1];
    match r.read(&mut extra)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after payload".into())),
    }
}

fn write_matrix<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(read_f64(r)?);
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn write_gram<W: Write>(w: &mut W, k: &GramMatrix) -> Result<()> {
    write_header(w, GRAM_MAGIC)?;
    w.write_all(&(k.n() as u64).to_le_bytes())?;
    write_matrix(w, k.matrix())
}

pub fn read_gram<R: Read>(r: &mut R) -> Result<GramMatrix> {
    read_header(r, GRAM_MAGIC)?;
    let n = read_dim(r, "N")?;
    let m = read_matrix(r, n, n)?;
    expect_eof(r)?;
    GramMatrix::new(m)
}

pub fn write_nystrom<W: Write>(w: &mut W, model: &NystromModel) -> Result<()> {
    write_header(w, NYSTROM_MAGIC)?;
    w.write_all(&(model.n() as u64).to_le_bytes())?;
    w.write_all(&(model.m() as u64).to_le_bytes())?;
    w.write_all(&model.pinv_cutoff.to_le_bytes())?;
    for &i in &model.landmark_indices {
        w.write_all(&(i as u64).to_le_bytes())?;
    }
    write_matrix(w, &model.c)?;
    write_matrix(w, &model.w_pinv)
}

pub fn read_nystrom<R: Read>(r: &mut R) -> Result<NystromModel> {
    read_header(r, NYSTROM_MAGIC)?;
    let n = read_dim(r, "N")?;
    let m = read_dim(r, "m")?;
    let pinv_cutoff = read_f64(r)?;
    let landmark_indices = (0..m)
        .map(|_| read_u64(r).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let c = read_matrix(r, n, m)?;
    let w_pinv = read_matrix(r, m, m)?;
    expect_eof(r)?;
    let model = NystromModel {
        landmark_indices,
        c,
        w_pinv,
        pinv_cutoff,
    };
    model.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(model)
}

fn fingerprint_bytes(hex: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = hex
            .get(2 * i..2 * i + 2)
            .and_then(|s| u8::from_str_radix(s, 16).ok())
            .unwrap_or(0);
    }
    out
}

pub fn write_svm<W: Write>(w: &mut W, model: &SvmModel) -> Result<()> {
    write_header(w, SVM_MAGIC)?;
    w.write_all(&(model.n() as u64).to_le_bytes())?;
    for v in [model.c, model.bias, model.jitter] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(model.iterations as u64).to_le_bytes())?;
    w.write_all(&[u8::from(model.converged)])?;
    w.write_all(&fingerprint_bytes(&model.fingerprint))?;
    for (a, &y) in model.alpha.iter().zip(&model.labels) {
        w.write_all(&[y as u8])?;
        w.write_all(&a.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_svm<R: Read>(r: &mut R) -> Result<SvmModel> {
    read_header(r, SVM_MAGIC)?;
    let n = read_dim(r, "N")?;
    let c = read_f64(r)?;
    let bias = read_f64(r)?;
    let jitter = read_f64(r)?;
    let iterations = read_u64(r)? as usize;
    let [converged] = read_array::<_, 1>(r)?;
    let fp: [u8; 32] = read_array(r)?;
    let mut alpha = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let [y] = read_array::<_, 1>(r)?;
        let y = y as i8;
        if y != 1 && y != -1 {
            return Err(Error::Format(format!("label byte {y} is not +1 or -1")));
        }
        labels.push(y);
        alpha.push(read_f64(r)?);
    }
    expect_eof(r)?;
    Ok(SvmModel {
        support_indices: (0..n).filter(|&i| alpha[i] > SUPPORT_THRESHOLD).collect(),
        alpha,
        bias,
        labels,
        c,
        fingerprint: fp.iter().map(|b| format!("{b:02x}")).collect(),
        jitter,
        iterations,
        converged: converged != 0,
    })
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("not a number: {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Format("ragged or empty matrix CSV".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn save_gram(path: &Path, k: &GramMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_gram(&mut w, k)?;
    w.flush()?;
    Ok(())
}

pub fn load_gram(path: &Path) -> Result<GramMatrix> {
    read_gram(&mut BufReader::new(File::open(path)?))
}

pub fn save_nystrom(path: &Path, model: &NystromModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_nystrom(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_nystrom(path: &Path) -> Result<NystromModel> {
    read_nystrom(&mut BufReader::new(File::open(path)?))
}

pub fn save_svm(path: &Path, model: &SvmModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_svm(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_svm(path: &Path) -> Result<SvmModel> {
    read_svm(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nystrom::build_nystrom_from_gram;
    use crate::svm::train_smo;

    fn sample_gram() -> GramMatrix {
        GramMatrix::new(DMatrix::from_row_slice(3, 3, &[1.0, 0.25, 0.5, 0.25, 1.0, 0.125, 0.5, 0.125, 1.0]))
            .unwrap()
    }

    #[test]
    fn gram_layout_is_exact() {
        let k = sample_gram();
        let mut buf = Vec::new();
        write_gram(&mut buf, &k).unwrap();
        assert_eq!(&buf[..5], b"QKGM\x01");
        assert_eq!(u64::from_le_bytes(buf[5..13].try_into().unwrap()), 3);
        assert_eq!(buf.len(), 13 + 9 * 8);
        assert_eq!(f64::from_le_bytes(buf[13 + 8..13 + 16].try_into().unwrap()), 0.25);
        assert_eq!(read_gram(&mut buf.as_slice()).unwrap(), k);
    }

    #[test]
    fn rejects_corrupt_files() {
        let k = sample_gram();
        let mut buf = Vec::new();
        write_gram(&mut buf, &k).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_gram(&mut bad.as_slice()), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(read_gram(&mut bad.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_gram(&mut &buf[..buf.len() - 1]), Err(Error::Format(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(read_gram(&mut long.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn nystrom_round_trip() {
        let model = build_nystrom_from_gram(&sample_gram(), &[0, 2]).unwrap();
        let mut buf = Vec::new();
        write_nystrom(&mut buf, &model).unwrap();
        assert_eq!(&buf[..4], b"QKNY");
        assert_eq!(read_nystrom(&mut buf.as_slice()).unwrap(), model);
    }

    #[test]
    fn svm_round_trip() {
        let k = sample_gram();
        let model = train_smo(&k, &[1, -1, 1], 1.0, 1e-6, 1000).unwrap();
        let mut buf = Vec::new();
        write_svm(&mut buf, &model).unwrap();
        assert_eq!(&buf[..4], b"QKSV");
        assert_eq!(read_svm(&mut buf.as_slice()).unwrap(), model);
    }

    #[test]
    fn csv_round_trip_and_files() {
        let k = sample_gram();
        let text = matrix_to_csv(k.matrix());
        assert_eq!(text.lines().next().unwrap(), "1,0.25,0.5");
        assert_eq!(&matrix_from_csv(&text).unwrap(), k.matrix());
        assert!(matrix_from_csv("1,2\n3\n").is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.qkgm");
        save_gram(&path, &k).unwrap();
        assert_eq!(load_gram(&path).unwrap(), k);
    }
}
