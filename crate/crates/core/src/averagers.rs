//! First-moment (momentum) and second-moment (ψ) averaging used by the
//! non-nested and nested adaptive methods.
//!
//! The second-moment recurrences are the incremental forms of
//!
//! * GDA: `ψ = 1`
//! * AdaGrad: `ψ = v0 + Σ g_i²`
//! * Adam: `ψ = γ^{t+1} v0 + (1−γ) Σ γ^{t−i} g_i²`
//! * AMSGrad: the running maximum of the Adam sequence.
//!
//! There is no bias correction and no denominator epsilon. A coordinate with
//! zero moment and zero second moment takes a zero step.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::vecops;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Psi {
    Gda,
    AdaGrad,
    Adam { gamma: f64 },
    AmsGrad { gamma: f64 },
}

impl Psi {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Psi::Adam { gamma } | Psi::AmsGrad { gamma } if !(gamma > 0.0 && gamma < 1.0) => {
                Err(Error::InvalidConfig(format!("ψ gamma must lie in (0, 1), got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Psi::Gda => "gda",
            Psi::AdaGrad => "adagrad",
            Psi::Adam { .. } => "adam",
            Psi::AmsGrad { .. } => "amsgrad",
        }
    }

    /// Parses `gda|adagrad|adam|amsgrad`, attaching `gamma` to the EMA variants.
    pub fn parse(name: &str, gamma: f64) -> Result<Psi> {
        let psi = match name.trim().to_ascii_lowercase().as_str() {
            "gda" => Psi::Gda,
            "adagrad" => Psi::AdaGrad,
            "adam" => Psi::Adam { gamma },
            "amsgrad" => Psi::AmsGrad { gamma },
            other => return Err(Error::Usage(format!("--psi: unknown averaging function '{other}'"))),
        };
        psi.validate()?;
        Ok(psi)
    }
}

/// Whether the second moment is tracked per coordinate or as one `‖g‖²` scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    PerCoordinate,
    Scalar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragerState {
    pub beta: f64,
    pub psi: Psi,
    pub mode: Mode,
    pub m: Vec<f64>,
    /// ψ accumulator; for AMSGrad this is the underlying Adam track.
    pub v: Vec<f64>,
    /// AMSGrad running maximum. Zero until the first update.
    pub v_hat: Vec<f64>,
    pub v0: Vec<f64>,
    pub updates: u64,
}

impl AveragerState {
    pub fn new(dim: usize, psi: Psi, mode: Mode, beta: f64, v0: f64) -> Result<Self> {
        psi.validate()?;
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::InvalidConfig(format!("momentum beta must lie in [0, 1), got {beta}")));
        }
        if !(v0 >= 0.0) {
            return Err(Error::InvalidConfig(format!("v0 must be nonnegative, got {v0}")));
        }
        let vdim = match mode {
            Mode::PerCoordinate => dim,
            Mode::Scalar => 1,
        };
        Ok(Self {
            beta,
            psi,
            mode,
            m: vec![0.0; dim],
            v: vec![v0; vdim],
            v_hat: vec![0.0; vdim],
            v0: vec![v0; vdim],
            updates: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    /// Consumes one gradient: `m ← βm + (1−β)g`, then the ψ recurrence.
    pub fn update(&mut self, g: &[f64]) -> Result<()> {
        check_len(self.m.len(), g.len())?;
        let beta = self.beta;
        for (mi, gi) in self.m.iter_mut().zip(g) {
            *mi = beta * *mi + (1.0 - beta) * gi;
        }
        let scalar_sq;
        let squares: Box<dyn Iterator<Item = f64> + '_> = match self.mode {
            Mode::PerCoordinate => Box::new(g.iter().map(|x| x * x)),
            Mode::Scalar => {
                scalar_sq = vecops::norm_sq(g);
                Box::new(std::iter::once(scalar_sq))
            }
        };
        match self.psi {
            Psi::Gda => self.v.iter_mut().for_each(|v| *v = 1.0),
            Psi::AdaGrad => self.v.iter_mut().zip(squares).for_each(|(v, s)| *v += s),
            Psi::Adam { gamma } => {
                self.v.iter_mut().zip(squares).for_each(|(v, s)| *v = gamma * *v + (1.0 - gamma) * s)
            }
            Psi::AmsGrad { gamma } => {
                for ((v, vh), s) in self.v.iter_mut().zip(self.v_hat.iter_mut()).zip(squares) {
                    *v = gamma * *v + (1.0 - gamma) * s;
                    *vh = vh.max(*v);
                }
            }
        }
        self.updates += 1;
        Ok(())
    }

    /// The second moment that scales the step: `v_hat` for AMSGrad, else `v`.
    pub fn denominator(&self) -> &[f64] {
        match self.psi {
            Psi::AmsGrad { .. } if self.updates > 0 => &self.v_hat,
            _ => &self.v,
        }
    }

    /// `(η/√v) ⊙ m`, with `0/0 → 0` per coordinate.
    pub fn effective_step(&self, eta: f64) -> Vec<f64> {
        let den = self.denominator();
        self.m
            .iter()
            .enumerate()
            .map(|(i, &mi)| {
                let vi = match self.mode {
                    Mode::PerCoordinate => den[i],
                    Mode::Scalar => den[0],
                };
                if mi == 0.0 {
                    0.0
                } else {
                    eta * mi / vi.sqrt()
                }
            })
            .collect()
    }

    /// Mean of the step-scaling second moment.
    pub fn v_mean(&self) -> f64 {
        let den = self.denominator();
        den.iter().sum::<f64>() / den.len() as f64
    }
}
