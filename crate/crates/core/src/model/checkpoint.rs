//! Binary checkpoint layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "RELU3CKP"
//! version      u32      1
//! header_len   u32      length of the JSON header in bytes
//! header       JSON     {"m", "d", "d_out", "alpha", "hidden_bias_input", "seed", "config_hash"}
//! W1           f64 x m*(d+1)      row-major
//! W2           f64 x m*(m+1)      row-major
//! A            f64 x d_out*m      row-major
//! ```
//!
//! Nothing follows `A`; trailing bytes are rejected.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Network;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RELU3CKP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub m: usize,
    pub d: usize,
    pub d_out: usize,
    pub alpha: f64,
    pub hidden_bias_input: f64,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    net: &Network,
    seed: Option<u64>,
    config_hash: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let header = CheckpointHeader {
        m: net.width(),
        d: net.input_dim(),
        d_out: net.output_dim(),
        alpha: net.alpha,
        hidden_bias_input: net.hidden_bias_input,
        seed,
        config_hash: config_hash.map(str::to_owned),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(16 + json.len() + 8 * net.num_params());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for mat in [&net.w1, &net.w2, &net.a] {
        for v in mat.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Network, CheckpointHeader)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::Format {
        kind: "checkpoint",
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing RELU3CKP magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = 16usize
        .checked_add(header_len)
        .filter(|end| *end <= bytes.len())
        .ok_or_else(|| bad("header runs past end of file".into()))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[16..body]).map_err(|e| bad(format!("header: {e}")))?;
    let (m, d, o) = (header.m, header.d, header.d_out);
    if m == 0 || d == 0 || o == 0 {
        return Err(bad("zero dimension in header".into()));
    }
    let sizes = [m * (d + 1), m * (m + 1), o * m];
    let expected: usize = sizes.iter().sum::<usize>() * 8;
    if bytes.len() - body != expected {
        return Err(bad(format!(
            "expected {expected} bytes of weights, found {}",
            bytes.len() - body
        )));
    }
    let mut floats = bytes[body..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |rows: usize, cols: usize| Matrix::from_vec(rows, cols, floats.by_ref().take(rows * cols).collect());
    let w1 = take(m, d + 1);
    let w2 = take(m, m + 1);
    let a = take(o, m);
    let net = Network::new(w1, w2, a, header.alpha, header.hidden_bias_input)
        .map_err(|e| bad(e.to_string()))?;
    Ok((net, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_network_seeded;
    use crate::scaling::{config_from_gammas, PhasePoint};

    #[test]
    fn round_trip_is_exact() {
        let cfg = config_from_gammas(PhasePoint::new(0.5, 2.0).unwrap(), 7, 3, 2).unwrap();
        let net = init_network_seeded(&cfg, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("net.ckpt");
        save_checkpoint(&p, &net, Some(9), Some("abc")).unwrap();
        let (back, header) = load_checkpoint(&p).unwrap();
        assert_eq!(back, net);
        assert_eq!(header.seed, Some(9));
        assert_eq!(header.config_hash.as_deref(), Some("abc"));
    }

    #[test]
    fn corruption_is_detected() {
        let net = Network::zeros(1, 2, 1, 1.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("net.ckpt");
        save_checkpoint(&p, &net, None, None).unwrap();
        let good = fs::read(&p).unwrap();

        fs::write(&p, &good[..good.len() - 3]).unwrap();
        assert!(matches!(load_checkpoint(&p), Err(Error::Format { .. })));
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        fs::write(&p, &bad_magic).unwrap();
        assert!(matches!(load_checkpoint(&p), Err(Error::Format { .. })));
        assert!(matches!(
            load_checkpoint(dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }
}
