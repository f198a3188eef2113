//! Battery recursion and trajectory simulation.
//!
//! Level convention: `levels[i][t]` is the battery of user `i` after the
//! slot-`t` arrival has been credited and before the slot-`t` spend, so
//!
//! ```text
//! b_t = min(b_{t-1} - g_{t-1} + e_t, cap),   b_0 = 0,   0 <= g_t <= b_t.
//! ```

use std::io::{self, Write};

use rand::Rng;

use crate::arrivals::ArrivalModel;
use crate::enumerate::{check_policies, spends_into};
use crate::error::{Error, Result};
use crate::policies::Policy;
use crate::rng::stream_rng;
use crate::FLOAT_SLACK;

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryState {
    levels: Vec<f64>,
    caps: Vec<f64>,
}

impl BatteryState {
    /// Empty batteries.
    pub fn empty(caps: &[f64]) -> Result<Self> {
        Self::new(vec![0.0; caps.len()], caps.to_vec())
    }

    pub fn new(levels: Vec<f64>, caps: Vec<f64>) -> Result<Self> {
        if levels.len() != caps.len() {
            return Err(Error::DimensionMismatch {
                expected: caps.len(),
                got: levels.len(),
            });
        }
        for (i, (&b, &c)) in levels.iter().zip(&caps).enumerate() {
            if !(c > 0.0) || !(b >= 0.0 && b <= c) {
                return Err(Error::InvalidArgument(format!(
                    "user {i}: level {b} outside [0, {c}]"
                )));
            }
        }
        Ok(BatteryState { levels, caps })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    /// Spend `spends`, then credit `arrivals` and clip at the caps.
    pub fn step(&self, spends: &[f64], arrivals: &[f64]) -> Result<BatteryState> {
        let mut next = self.clone();
        next.step_in_place(spends, arrivals)?;
        Ok(next)
    }

    pub fn step_in_place(&mut self, spends: &[f64], arrivals: &[f64]) -> Result<()> {
        let k = self.levels.len();
        if spends.len() != k || arrivals.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: spends.len().min(arrivals.len()),
            });
        }
        for i in 0..k {
            let (level, spend) = (self.levels[i], spends[i]);
            if !(spend >= -FLOAT_SLACK && spend <= level + FLOAT_SLACK) {
                return Err(Error::Overspend {
                    user: i,
                    spend,
                    level,
                });
            }
        }
        for i in 0..k {
            let residual = (self.levels[i] - spends[i]).max(0.0);
            self.levels[i] = (residual + arrivals[i]).min(self.caps[i]);
        }
        Ok(())
    }
}

/// A simulated path; every matrix is `K × n` with rows indexed by user.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub arrivals: Vec<Vec<f64>>,
    pub spends: Vec<Vec<f64>>,
    pub levels: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn users(&self) -> usize {
        self.arrivals.len()
    }

    pub fn horizon(&self) -> usize {
        self.arrivals.first().map_or(0, Vec::len)
    }

    /// Writes `t,user,arrival,level,spend` rows, 1-based slot and user.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,user,arrival,level,spend")?;
        for t in 0..self.horizon() {
            for i in 0..self.users() {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    t + 1,
                    i + 1,
                    self.arrivals[i][t],
                    self.levels[i][t],
                    self.spends[i][t]
                )?;
            }
        }
        Ok(())
    }
}

/// Runs `policies` against a fixed `K × n` arrival matrix from empty batteries.
pub fn replay(arrivals: &[Vec<f64>], caps: &[f64], policies: &[Policy]) -> Result<Trajectory> {
    let k = caps.len();
    if arrivals.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: arrivals.len(),
        });
    }
    if policies.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: policies.len(),
        });
    }
    let n = arrivals.first().map_or(0, Vec::len);
    let mut state = BatteryState::empty(caps)?;
    let mut spends = vec![0.0; k];
    let mut column = vec![0.0; k];
    let mut out = Trajectory {
        arrivals: arrivals.to_vec(),
        spends: vec![Vec::with_capacity(n); k],
        levels: vec![Vec::with_capacity(n); k],
    };
    for t in 0..n {
        for i in 0..k {
            column[i] = arrivals[i][t];
        }
        state.step_in_place(&spends, &column)?;
        spends_into(policies, caps, state.levels(), &mut spends)?;
        for i in 0..k {
            out.levels[i].push(state.levels()[i]);
            out.spends[i].push(spends[i]);
        }
    }
    Ok(out)
}

/// Samples arrivals from `model` with `rng` and runs `policies` for `n` slots.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    model: &ArrivalModel,
    policies: &[Policy],
    n: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    check_policies(model, policies)?;
    let arrivals = model.sample_path(n, rng);
    replay(&arrivals, model.caps(), policies)
}

/// [`simulate_with_rng`] with the generator derived from `seed`.
pub fn simulate_trajectory(
    model: &ArrivalModel,
    policies: &[Policy],
    n: usize,
    seed: u64,
) -> Result<Trajectory> {
    simulate_with_rng(model, policies, n, &mut stream_rng(seed, 0))
}
