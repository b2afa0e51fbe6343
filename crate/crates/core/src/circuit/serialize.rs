//! Circuit files: a compact little-endian binary record and an equivalent JSON
//! document.
//!
//! Binary layout (version 1):
//!
//! ```text
//! magic "ABCR" | version u8 | L u32 | p f64 | t_max u32 | boundary u8 | ensemble u8
//! | master_seed u64 | initial_position u32 | circuit_index u64 | n_steps u32 | step*
//! step := kind u8 (0 chaotic, 1 control) | site u32 | [gate]
//! gate := 0 u8 | 12 × f64 angles | cz u8     (angle form)
//!       | 1 u8 | 16 × (re f64, im f64)       (row-major matrix)
//! ```

use serde::{Deserialize, Serialize};

use super::{
    Boundary, CircuitParams, CircuitRealization, Ensemble, GateSpec, Mat4, StepOp, C64, N_ANGLES,
};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u8 = 1;
const MAGIC: &[u8; 4] = b"ABCR";

pub fn serialize_circuit(c: &CircuitRealization) -> Vec<u8> {
    let p = &c.params;
    let mut out = Vec::with_capacity(64 + c.steps.len() * 110);
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(p.l as u32).to_le_bytes());
    out.extend_from_slice(&p.p.to_le_bytes());
    out.extend_from_slice(&(p.t_max as u32).to_le_bytes());
    out.push(match p.boundary {
        Boundary::Periodic => 0,
        Boundary::Open => 1,
    });
    out.push(match p.ensemble {
        Ensemble::ApproxHaarCz => 0,
        Ensemble::ExactHaar => 1,
    });
    out.extend_from_slice(&p.master_seed.to_le_bytes());
    out.extend_from_slice(&(p.initial_position as u32).to_le_bytes());
    out.extend_from_slice(&c.circuit_index.to_le_bytes());
    out.extend_from_slice(&(c.steps.len() as u32).to_le_bytes());
    for step in &c.steps {
        match step {
            StepOp::Control { site } => {
                out.push(1);
                out.extend_from_slice(&(*site as u32).to_le_bytes());
            }
            StepOp::Chaotic { site, gate } => {
                out.push(0);
                out.extend_from_slice(&(*site as u32).to_le_bytes());
                match gate {
                    GateSpec::ApproxHaarCz { angles, cz } => {
                        out.push(0);
                        for a in angles {
                            out.extend_from_slice(&a.to_le_bytes());
                        }
                        out.push(u8::from(*cz));
                    }
                    GateSpec::Matrix(m) => {
                        out.push(1);
                        for r in 0..4 {
                            for col in 0..4 {
                                let z = m[(r, col)];
                                out.extend_from_slice(&z.re.to_le_bytes());
                                out.extend_from_slice(&z.im.to_le_bytes());
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos,
                reason: format!("truncated while reading {what}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn bad<T>(&self, at: usize, reason: impl Into<String>) -> Result<T> {
        Err(Error::Format {
            offset: at,
            reason: reason.into(),
        })
    }
}

pub fn deserialize_circuit(bytes: &[u8]) -> Result<CircuitRealization> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return r.bad(0, "bad magic");
    }
    let version = r.u8("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let l = r.u32("L")? as usize;
    let p = r.f64("p")?;
    let t_max = r.u32("t_max")? as usize;
    let at = r.pos;
    let boundary = match r.u8("boundary")? {
        0 => Boundary::Periodic,
        1 => Boundary::Open,
        b => return r.bad(at, format!("unknown boundary tag {b}")),
    };
    let at = r.pos;
    let ensemble = match r.u8("ensemble")? {
        0 => Ensemble::ApproxHaarCz,
        1 => Ensemble::ExactHaar,
        e => return r.bad(at, format!("unknown ensemble tag {e}")),
    };
    let master_seed = r.u64("master_seed")?;
    let initial_position = r.u32("initial_position")? as usize;
    let circuit_index = r.u64("circuit_index")?;
    let n_steps = r.u32("step count")? as usize;
    let params = CircuitParams {
        l,
        p,
        t_max,
        boundary,
        ensemble,
        master_seed,
        initial_position,
    };
    params.validate().map_err(|e| Error::Format {
        offset: 5,
        reason: e.to_string(),
    })?;

    let mut steps = Vec::with_capacity(n_steps.min(1 << 20));
    for k in 0..n_steps {
        let at = r.pos;
        let kind = r.u8("step kind")?;
        let site = r.u32("site")? as usize;
        if site >= l {
            return r.bad(at + 1, format!("step {k}: site {site} out of range"));
        }
        match kind {
            1 => steps.push(StepOp::Control { site }),
            0 => {
                let at = r.pos;
                let gate = match r.u8("gate tag")? {
                    0 => {
                        let mut angles = [0.0; N_ANGLES];
                        for a in angles.iter_mut() {
                            *a = r.f64("angle")?;
                        }
                        let at = r.pos;
                        let cz = match r.u8("cz flag")? {
                            0 => false,
                            1 => true,
                            v => return r.bad(at, format!("invalid cz flag {v}")),
                        };
                        GateSpec::ApproxHaarCz { angles, cz }
                    }
                    1 => {
                        let mut m = Mat4::zeros();
                        for row in 0..4 {
                            for col in 0..4 {
                                let re = r.f64("matrix entry")?;
                                let im = r.f64("matrix entry")?;
                                m[(row, col)] = C64::new(re, im);
                            }
                        }
                        GateSpec::Matrix(Box::new(m))
                    }
                    g => return r.bad(at, format!("unknown gate tag {g}")),
                };
                steps.push(StepOp::Chaotic { site, gate });
            }
            other => return r.bad(at, format!("unknown step kind {other}")),
        }
    }
    if r.pos != bytes.len() {
        return r.bad(r.pos, "trailing bytes after last step");
    }
    Ok(CircuitRealization {
        params,
        steps,
        circuit_index,
    })
}

#[derive(Serialize, Deserialize)]
struct CircuitDoc {
    version: u8,
    params: CircuitParams,
    circuit_index: u64,
    steps: Vec<StepDoc>,
}

#[derive(Serialize, Deserialize)]
struct StepDoc {
    kind: super::OpKind,
    site: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angles: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cz: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix_re: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix_im: Option<Vec<f64>>,
}

pub fn serialize_circuit_json(c: &CircuitRealization) -> Result<String> {
    let steps = c
        .steps
        .iter()
        .map(|s| match s {
            StepOp::Control { site } => StepDoc {
                kind: super::OpKind::Control,
                site: *site,
                angles: None,
                cz: None,
                matrix_re: None,
                matrix_im: None,
            },
            StepOp::Chaotic { site, gate } => {
                let mut doc = StepDoc {
                    kind: super::OpKind::Chaotic,
                    site: *site,
                    angles: None,
                    cz: None,
                    matrix_re: None,
                    matrix_im: None,
                };
                match gate {
                    GateSpec::ApproxHaarCz { angles, cz } => {
                        doc.angles = Some(angles.to_vec());
                        doc.cz = Some(*cz);
                    }
                    GateSpec::Matrix(m) => {
                        let entries = (0..16).map(|k| m[(k / 4, k % 4)]);
                        doc.matrix_re = Some(entries.clone().map(|z| z.re).collect());
                        doc.matrix_im = Some(entries.map(|z| z.im).collect());
                    }
                }
                doc
            }
        })
        .collect();
    let doc = CircuitDoc {
        version: FORMAT_VERSION,
        params: c.params.clone(),
        circuit_index: c.circuit_index,
        steps,
    };
    Ok(serde_json::to_string(&doc)?)
}

pub fn deserialize_circuit_json(text: &str) -> Result<CircuitRealization> {
    let doc: CircuitDoc = serde_json::from_str(text)?;
    if doc.version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: doc.version,
            expected: FORMAT_VERSION,
        });
    }
    doc.params.validate()?;
    let bad = |k: usize, reason: &str| Error::Parameter(format!("step {k}: {reason}"));
    let mut steps = Vec::with_capacity(doc.steps.len());
    for (k, s) in doc.steps.into_iter().enumerate() {
        if s.site >= doc.params.l {
            return Err(bad(k, "site out of range"));
        }
        let step = match s.kind {
            super::OpKind::Control => StepOp::Control { site: s.site },
            super::OpKind::Chaotic => {
                let gate = match (s.angles, s.cz, s.matrix_re, s.matrix_im) {
                    (Some(angles), Some(cz), None, None) => GateSpec::ApproxHaarCz {
                        angles: angles
                            .try_into()
                            .map_err(|_| bad(k, "expected 12 angles"))?,
                        cz,
                    },
                    (None, None, Some(re), Some(im)) if re.len() == 16 && im.len() == 16 => {
                        let m = Mat4::from_fn(|r, c| C64::new(re[4 * r + c], im[4 * r + c]));
                        GateSpec::Matrix(Box::new(m))
                    }
                    _ => return Err(bad(k, "chaotic step needs angles+cz or a 4x4 matrix")),
                };
                StepOp::Chaotic { site: s.site, gate }
            }
        };
        steps.push(step);
    }
    Ok(CircuitRealization {
        params: doc.params,
        steps,
        circuit_index: doc.circuit_index,
    })
}
