//! JSON interchange format for channel instances.
//!
//! ```json
//! {"kind": "parallel", "K": 2, "N": 3, "budgets": [1.0, 1.0],
//!  "gains": [[0.1, -0.4], ...]}
//! ```
//!
//! Gains are `[re, im]` pairs in row-major order: scalar `H_lk` at `l*K + k`;
//! parallel `H^n_lk` at `(n*K + l)*K + k`; MISO entry `t` of `h_lk` at
//! `(l*K + k)*Nt + t`; MIMO matrices `H_lk` for `l` then `k`, each stored
//! row-major with shape `N_k x M_l`. MIMO documents carry `antennas` as
//! `[M_k, N_k]` pairs. Floats are written in shortest round-trip form and
//! parsed exactly, so a round trip is bit-exact.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Antennas, MimoChannel, MisoChannel, ParallelChannel, ScalarChannel};
use crate::{CMatrix, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Scalar,
    Parallel,
    Miso,
    Mimo,
}

/// Serialized form of any channel instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDocument {
    pub kind: ChannelKind,
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub tones: Option<usize>,
    #[serde(rename = "Nt", default, skip_serializing_if = "Option::is_none")]
    pub tx_antennas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antennas: Option<Vec<[usize; 2]>>,
    pub budgets: Vec<f64>,
    pub gains: Vec<[f64; 2]>,
}

/// Any supported channel model.
#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    Scalar(ScalarChannel),
    Parallel(ParallelChannel),
    Miso(MisoChannel),
    Mimo(MimoChannel),
}

fn pairs<'a>(it: impl IntoIterator<Item = &'a Complex64>) -> Vec<[f64; 2]> {
    it.into_iter().map(|z| [z.re, z.im]).collect()
}

fn required(v: Option<usize>, name: &str) -> Result<usize> {
    v.ok_or_else(|| Error::Format(format!("missing field `{name}`")))
}

impl Channel {
    pub fn users(&self) -> usize {
        match self {
            Channel::Scalar(c) => c.users(),
            Channel::Parallel(c) => c.users(),
            Channel::Miso(c) => c.users(),
            Channel::Mimo(c) => c.users(),
        }
    }

    pub fn budgets(&self) -> &[f64] {
        match self {
            Channel::Scalar(c) => c.budgets(),
            Channel::Parallel(c) => c.budgets(),
            Channel::Miso(c) => c.budgets(),
            Channel::Mimo(c) => c.budgets(),
        }
    }

    pub fn kind(&self) -> ChannelKind {
        match self {
            Channel::Scalar(_) => ChannelKind::Scalar,
            Channel::Parallel(_) => ChannelKind::Parallel,
            Channel::Miso(_) => ChannelKind::Miso,
            Channel::Mimo(_) => ChannelKind::Mimo,
        }
    }

    pub fn with_uniform_budget(self, budget: f64) -> Result<Self> {
        Ok(match self {
            Channel::Scalar(c) => Channel::Scalar(c.with_uniform_budget(budget)?),
            Channel::Parallel(c) => Channel::Parallel(c.with_uniform_budget(budget)?),
            Channel::Miso(c) => Channel::Miso(c.with_uniform_budget(budget)?),
            Channel::Mimo(c) => Channel::Mimo(c.with_uniform_budget(budget)?),
        })
    }

    pub fn to_document(&self) -> ChannelDocument {
        let mut doc = ChannelDocument {
            kind: self.kind(),
            users: self.users(),
            tones: None,
            tx_antennas: None,
            antennas: None,
            budgets: self.budgets().to_vec(),
            gains: Vec::new(),
        };
        match self {
            Channel::Scalar(c) => doc.gains = pairs(c.gains()),
            Channel::Parallel(c) => {
                doc.tones = Some(c.tones());
                doc.gains = pairs(c.gains());
            }
            Channel::Miso(c) => {
                doc.tx_antennas = Some(c.antennas());
                doc.gains = pairs(c.gains().iter().flat_map(|h| h.iter()));
            }
            Channel::Mimo(c) => {
                doc.antennas = Some(c.antennas().iter().map(|a| [a.tx, a.rx]).collect());
                for h in c.gains() {
                    for i in 0..h.nrows() {
                        doc.gains.extend(h.row(i).iter().map(|z| [z.re, z.im]));
                    }
                }
            }
        }
        doc
    }

    pub fn from_document(doc: &ChannelDocument) -> Result<Self> {
        let k = doc.users;
        let gains: Vec<Complex64> = doc.gains.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        let budgets = doc.budgets.clone();
        Ok(match doc.kind {
            ChannelKind::Scalar => Channel::Scalar(ScalarChannel::new(k, gains, budgets)?),
            ChannelKind::Parallel => {
                let n = required(doc.tones, "N")?;
                Channel::Parallel(ParallelChannel::new(k, n, gains, budgets)?)
            }
            ChannelKind::Miso => {
                let nt = required(doc.tx_antennas, "Nt")?;
                if nt == 0 || gains.len() != k * k * nt {
                    return Err(Error::Dimension(format!("expected {} gains, got {}", k * k * nt, gains.len())));
                }
                let vecs = gains.chunks(nt).map(DVector::from_column_slice).collect();
                Channel::Miso(MisoChannel::new(k, nt, vecs, budgets)?)
            }
            ChannelKind::Mimo => {
                let ants: Vec<Antennas> = doc
                    .antennas
                    .as_ref()
                    .ok_or_else(|| Error::Format("missing field `antennas`".into()))?
                    .iter()
                    .map(|&[m, n]| Antennas::new(m, n))
                    .collect();
                if ants.len() != k {
                    return Err(Error::Dimension(format!("expected {k} antenna pairs, got {}", ants.len())));
                }
                let expected: usize = (0..k).flat_map(|l| (0..k).map(move |r| (l, r))).map(|(l, r)| ants[r].rx * ants[l].tx).sum();
                if gains.len() != expected {
                    return Err(Error::Dimension(format!("expected {expected} gains, got {}", gains.len())));
                }
                let mut mats = Vec::with_capacity(k * k);
                let mut offset = 0;
                for l in 0..k {
                    for r in 0..k {
                        let (rows, cols) = (ants[r].rx, ants[l].tx);
                        mats.push(CMatrix::from_row_slice(rows, cols, &gains[offset..offset + rows * cols]));
                        offset += rows * cols;
                    }
                }
                Channel::Mimo(MimoChannel::new(ants, mats, budgets)?)
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("channel documents always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ChannelDocument = serde_json::from_str(s)?;
        Self::from_document(&doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{gen_channel, ChannelDims};

    fn assert_bitwise_roundtrip(ch: Channel) {
        let json = ch.to_json();
        let back = Channel::from_json(&json).unwrap();
        assert_eq!(back.to_json(), json);
        let a = ch.to_document();
        let b = back.to_document();
        assert!(a.gains.iter().zip(&b.gains).all(|(x, y)| x[0].to_bits() == y[0].to_bits() && x[1].to_bits() == y[1].to_bits()));
        assert_eq!(ch, back);
    }

    #[test]
    fn roundtrip_every_kind() {
        for dims in [
            ChannelDims::Scalar { users: 3 },
            ChannelDims::Parallel { users: 2, tones: 5 },
            ChannelDims::Miso { users: 2, antennas: 3 },
            ChannelDims::Mimo { antennas: vec![Antennas::new(2, 3), Antennas::new(1, 2), Antennas::new(3, 1)] },
        ] {
            for seed in 0..5 {
                assert_bitwise_roundtrip(gen_channel(&dims, seed).unwrap().with_uniform_budget(3.7).unwrap());
            }
        }
    }

    #[test]
    fn malformed_documents_rejected() {
        assert!(Channel::from_json(r#"{"kind":"parallel","K":2,"budgets":[1,1],"gains":[]}"#).is_err());
        assert!(Channel::from_json(r#"{"kind":"scalar","K":2,"budgets":[1,1],"gains":[[1,0]]}"#).is_err());
        assert!(Channel::from_json(r#"{"kind":"warp","K":1,"budgets":[1],"gains":[[1,0]]}"#).is_err());
        assert!(Channel::from_json(r#"{"kind":"scalar","K":1,"budgets":[-1],"gains":[[1,0]]}"#).is_err());
    }

    #[test]
    fn mimo_layout_is_row_major() {
        let json = r#"{"kind":"mimo","K":1,"antennas":[[2,1]],"budgets":[1],"gains":[[1,0],[2,0]]}"#;
        let Channel::Mimo(ch) = Channel::from_json(json).unwrap() else { panic!("wrong kind") };
        assert_eq!(ch.gain(0, 0).shape(), (1, 2));
        assert_eq!(ch.gain(0, 0)[(0, 1)].re, 2.0);
    }
}
