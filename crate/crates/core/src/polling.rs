//! Two-queue polling system with (1,K)-limited service, uniformized into a
//! discrete-time 2d-QBD process.
//!
//! Levels are the queue lengths. Phase 0 means the server is at queue 1;
//! phase `j ∈ 1..=K` means it is at queue 2 with `j` services left in the
//! current visit. Phases chosen "at random" are uniform over the stated set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{QbdModel, Region, Step};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitedServiceParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu1: f64,
    pub mu2: f64,
    #[serde(rename = "K")]
    pub k: usize,
}

impl LimitedServiceParams {
    pub fn new(lambda1: f64, lambda2: f64, mu1: f64, mu2: f64, k: usize) -> Result<Self> {
        let p = Self {
            lambda1,
            lambda2,
            mu1,
            mu2,
            k,
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.k < 1 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        Ok(())
    }

    /// Smallest valid uniformization rate: the total event rate.
    pub fn total_rate(&self) -> f64 {
        self.lambda1 + self.lambda2 + self.mu1 + self.mu2
    }

    /// Arrival and service rates exchanged, i.e. the overloaded mirror image.
    pub fn inverted(&self) -> Self {
        Self {
            lambda1: self.mu1,
            lambda2: self.mu2,
            mu1: self.lambda1,
            mu2: self.lambda2,
            k: self.k,
        }
    }
}

/// Where a transition sends the phase.
enum Next {
    To(usize),
    Uniform(Vec<usize>),
}

struct Rates {
    s0: usize,
    // continuous-time rates per (region, step)
    blocks: Vec<(Region, Step, Matrix<f64>)>,
}

impl Rates {
    fn add(&mut self, region: Region, step: Step, from: usize, next: Next, rate: f64) {
        let idx = match self
            .blocks
            .iter()
            .position(|(r, s, _)| *r == region && *s == step)
        {
            Some(i) => i,
            None => {
                self.blocks
                    .push((region, step, Matrix::zeros(self.s0, self.s0)));
                self.blocks.len() - 1
            }
        };
        let m = &mut self.blocks[idx].2;
        match next {
            Next::To(j) => m[(from, j)] += rate,
            Next::Uniform(set) => {
                let share = rate / set.len() as f64;
                for j in set {
                    m[(from, j)] += share;
                }
            }
        }
    }
}

/// Builds the model with uniformization rate `λ1 + λ2 + μ1 + μ2`.
pub fn build_limited_service<T: Real>(p: &LimitedServiceParams) -> Result<QbdModel<T>> {
    build_limited_service_with_rate(p, p.total_rate())
}

/// Builds the model with an explicit uniformization rate `nu`, which must
/// dominate the total event rate. Larger values only add self-loops.
pub fn build_limited_service_with_rate<T: Real>(
    p: &LimitedServiceParams,
    nu: f64,
) -> Result<QbdModel<T>> {
    p.check()?;
    if !(nu >= p.total_rate() * (1.0 - 1e-15)) {
        return Err(Error::InvalidParameter(format!(
            "uniformization rate {nu} is below the total event rate {}",
            p.total_rate()
        )));
    }
    let k = p.k;
    let s0 = k + 1;
    let all: Vec<usize> = (0..s0).collect();
    // a fresh queue-2 visit of K services; with K = 1 phases 0 and 1 are
    // indistinguishable on arrival and the choice is randomized
    let first = || {
        if k >= 2 {
            Next::To(k)
        } else {
            Next::Uniform(vec![0, 1])
        }
    };
    let low = || Next::Uniform(vec![0, 1]);

    let mut r = Rates {
        s0,
        blocks: Vec::new(),
    };
    let (l1, l2, m1, m2) = (p.lambda1, p.lambda2, p.mu1, p.mu2);
    for j in 0..s0 {
        r.add(Region::Interior, Step::new(1, 0), j, Next::To(j), l1);
        r.add(Region::Interior, Step::new(0, 1), j, Next::To(j), l2);
        if j == 0 {
            r.add(Region::Interior, Step::new(-1, 0), 0, Next::To(k), m1);
        } else {
            r.add(
                Region::Interior,
                Step::new(0, -1),
                j,
                Next::To(if j >= 2 { j - 1 } else { 0 }),
                m2,
            );
        }

        r.add(
            Region::XAxis,
            Step::new(1, 0),
            j,
            Next::Uniform(all.clone()),
            l1,
        );
        r.add(Region::XAxis, Step::new(0, 1), j, Next::To(0), l2);
        r.add(
            Region::XAxis,
            Step::new(-1, 0),
            j,
            Next::Uniform(all.clone()),
            m1,
        );

        let idle = j <= 1;
        r.add(
            Region::YAxis,
            Step::new(1, 0),
            j,
            Next::To(if idle { 1 } else { j }),
            l1,
        );
        r.add(
            Region::YAxis,
            Step::new(0, 1),
            j,
            if idle { low() } else { Next::To(j) },
            l2,
        );
        let after = if idle {
            first()
        } else if j - 1 == 1 {
            low()
        } else {
            Next::To(j - 1)
        };
        r.add(Region::YAxis, Step::new(0, -1), j, after, m2);

        r.add(
            Region::Origin,
            Step::new(1, 0),
            j,
            Next::Uniform(all.clone()),
            l1,
        );
        r.add(Region::Origin, Step::new(0, 1), j, first(), l2);
    }

    let mut model = QbdModel::zeros(s0);
    for (region, step, m) in &r.blocks {
        model.set_block(*region, *step, m.scale(1.0 / nu).cast())?;
    }
    for region in Region::ALL {
        let out_rate: Vec<f64> = r.blocks.iter().filter(|(reg, _, _)| *reg == region).fold(
            vec![0.0; s0],
            |mut acc, (_, _, m)| {
                for (a, s) in acc.iter_mut().zip(m.row_sums()) {
                    *a += s;
                }
                acc
            },
        );
        let stay = model.block_mut(region, Step::new(0, 0));
        for (j, out) in out_rate.into_iter().enumerate() {
            stay[(j, j)] += T::lit((nu - out) / nu);
        }
    }
    Ok(model)
}
