use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::config::GridSteps;
use crate::error::{Error, Result};
use crate::game::{DeviationMode, Layout};
use crate::scalar::{norm, Scalar};

/// Uncertainty inputs recorded at every stepped node (`t > 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord<T> {
    /// `steps × n`
    pub theta: Vec<T>,
    /// Delays in grid steps, `steps × n`.
    pub tau: Vec<usize>,
    /// `steps × n × total_dim`; block `(i, j)` holds `d_ij`, the diagonal block is zero.
    pub d: Vec<T>,
}

/// Deviation path sampled on the nodes `-T, -T+h, …, 0, …, horizon`.
///
/// All inputs are piecewise constant on the grid, so node maxima are the exact
/// window suprema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryGrid<T> {
    pub h: T,
    pub grid: GridSteps,
    pub layout: Layout,
    pub mode: DeviationMode,
    pub q_star: Vec<T>,
    /// Per-coordinate divisor mapping raw deviations to `x`.
    pub scale: Vec<T>,
    x: Vec<T>,
    norms: Vec<T>,
    pub signals: Option<SignalRecord<T>>,
}

impl<T: Scalar> TrajectoryGrid<T> {
    pub fn with_history(
        h: T,
        grid: GridSteps,
        layout: Layout,
        mode: DeviationMode,
        q_star: Vec<T>,
        scale: Vec<T>,
        history: &[Vec<T>],
    ) -> Self {
        let dim = layout.total();
        let nodes = grid.nodes();
        let n = layout.players();
        let mut traj = Self {
            h,
            grid,
            layout,
            mode,
            q_star,
            scale,
            x: vec![T::zero(); nodes * dim],
            norms: vec![T::zero(); nodes * n],
            signals: None,
        };
        for (k, row) in history.iter().enumerate() {
            traj.set(k, row);
        }
        traj
    }

    pub fn players(&self) -> usize {
        self.layout.players()
    }

    pub fn nodes(&self) -> usize {
        self.grid.nodes()
    }

    /// Index of the node at `t = 0`.
    pub fn origin(&self) -> usize {
        self.grid.window
    }

    pub fn time(&self, node: usize) -> T {
        (T::of_usize(node) - T::of_usize(self.origin())) * self.h
    }

    pub fn node_at(&self, t: T) -> Result<usize> {
        let u = t / self.h + T::of_usize(self.origin());
        let k = u.round();
        if (u - k).abs() > T::tol(1e-9) * k.abs().max(T::one()) || k < T::zero() {
            return Err(Error::InvalidArgument(format!(
                "t = {t} is not a grid node"
            )));
        }
        let k = k.to_usize().unwrap_or(usize::MAX);
        if k >= self.nodes() {
            return Err(Error::InvalidArgument(format!(
                "t = {t} beyond the horizon"
            )));
        }
        Ok(k)
    }

    pub fn set(&mut self, node: usize, x: &[T]) {
        let dim = self.layout.total();
        self.x[node * dim..(node + 1) * dim].copy_from_slice(x);
        let n = self.players();
        for i in 0..n {
            self.norms[node * n + i] = norm(self.layout.slice(x, i));
        }
    }

    pub(crate) fn set_player(&mut self, node: usize, i: usize, xi: &[T]) {
        let dim = self.layout.total();
        let range = self.layout.range(i);
        self.x[node * dim + range.start..node * dim + range.end].copy_from_slice(xi);
        let n = self.players();
        self.norms[node * n + i] = norm(xi);
    }

    /// Deviation vector at a node, in mode units.
    pub fn x(&self, node: usize) -> &[T] {
        let dim = self.layout.total();
        &self.x[node * dim..(node + 1) * dim]
    }

    pub fn x_player(&self, node: usize, i: usize) -> &[T] {
        self.layout.slice(self.x(node), i)
    }

    /// `|x_i|` at a node.
    pub fn norm(&self, node: usize, i: usize) -> T {
        self.norms[node * self.players() + i]
    }

    /// Action profile `q = q* + scale · x` at a node.
    pub fn profile(&self, node: usize) -> Vec<T> {
        self.x(node)
            .iter()
            .zip(&self.q_star)
            .zip(&self.scale)
            .map(|((&x, &s), &k)| s + k * x)
            .collect()
    }

    /// `max |x_j|` over the nodes `node - lo ..= node - hi` (offsets in steps).
    pub fn window_sup(&self, j: usize, node: usize, lo: usize, hi: usize) -> Result<T> {
        if node < lo {
            return Err(Error::WindowUnderflow {
                start: self.time(node).as_f64() - self.h.as_f64() * lo as f64,
                earliest: self.time(0).as_f64(),
            });
        }
        Ok((node - lo..=node - hi.min(lo))
            .map(|k| self.norm(k, j))
            .fold(T::zero(), T::max))
    }

    /// `‖x_j‖_{[t - lo, t - hi]}` with offsets given in time units.
    pub fn window_sup_at(&self, j: usize, t: T, lo: T, hi: T) -> Result<T> {
        let lo_steps = super::config::ratio(lo, self.h, "window offset / h")?;
        let hi_steps = super::config::ratio(hi, self.h, "window offset / h")?;
        if hi_steps > lo_steps {
            return Err(Error::InvalidArgument(
                "window end precedes its start".into(),
            ));
        }
        let start = t - lo;
        if start < self.time(0) - T::tol(1e-12) {
            return Err(Error::WindowUnderflow {
                start: start.as_f64(),
                earliest: self.time(0).as_f64(),
            });
        }
        let node = self.node_at(t)?;
        self.window_sup(j, node, lo_steps, hi_steps)
    }

    /// `max_i ‖x_i‖_{[t-T, t]}` for a node with `t >= 0`.
    pub fn window_metric(&self, node: usize) -> Result<T> {
        (0..self.players())
            .map(|i| self.window_sup(i, node, self.grid.window, 0))
            .try_fold(T::zero(), |m, s| Ok(m.max(s?)))
    }

    /// Window metric at every node from `t = 0` to the horizon.
    pub fn metric_series(&self) -> Vec<T> {
        (self.origin()..self.nodes())
            .map(|k| self.window_metric(k).expect("node at or after the origin"))
            .collect()
    }

    /// Largest node-to-node change over the whole grid.
    pub fn max_drift(&self) -> T {
        (1..self.nodes())
            .flat_map(|k| {
                self.x(k)
                    .iter()
                    .zip(self.x(k - 1))
                    .map(|(&a, &b)| (a - b).abs())
            })
            .fold(T::zero(), T::max)
    }

    fn column_names(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.players() {
            let d = self.layout.dim(i);
            if d == 1 {
                out.push(format!("{prefix}_{}", i + 1));
            } else {
                out.extend((0..d).map(|k| format!("{prefix}_{}_{}", i + 1, k + 1)));
            }
        }
        out
    }

    /// Writes `t,q_…,x_…,theta_…,tau_…` rows, one per node, plus `V_1..V_n`
    /// when `v` (node-major, one row per node with `t >= 0`) is given.
    ///
    /// History nodes carry no uncertainty inputs or functionals and leave those
    /// cells empty.
    pub fn write_csv<W: Write>(&self, mut w: W, v: Option<&[T]>) -> io::Result<()> {
        let n = self.players();
        let mut header = vec!["t".to_string()];
        header.extend(self.column_names("q"));
        header.extend(self.column_names("x"));
        header.extend((1..=n).map(|i| format!("theta_{i}")));
        header.extend((1..=n).map(|i| format!("tau_{i}")));
        if v.is_some() {
            header.extend((1..=n).map(|i| format!("V_{i}")));
        }
        writeln!(w, "{}", header.join(","))?;
        let fmt = |v: T| format!("{:.16e}", v.as_f64());
        for k in 0..self.nodes() {
            let mut row = vec![fmt(self.time(k))];
            row.extend(self.profile(k).into_iter().map(fmt));
            row.extend(self.x(k).iter().map(|&x| fmt(x)));
            match (&self.signals, k.checked_sub(self.origin() + 1)) {
                (Some(sig), Some(s)) => {
                    row.extend(sig.theta[s * n..(s + 1) * n].iter().map(|&x| fmt(x)));
                    row.extend(
                        sig.tau[s * n..(s + 1) * n]
                            .iter()
                            .map(|&st| fmt(self.h * T::of_usize(st))),
                    );
                }
                _ => row.extend(std::iter::repeat_n(String::new(), 2 * n)),
            }
            if let Some(v) = v {
                match k.checked_sub(self.origin()) {
                    Some(s) => row.extend(v[s * n..(s + 1) * n].iter().map(|&x| fmt(x))),
                    None => row.extend(std::iter::repeat_n(String::new(), n)),
                }
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> TrajectoryGrid<f64> {
        // T = 2, h = 0.5, r = 1
        let grid = GridSteps {
            r: 2,
            window: 4,
            horizon: 0,
        };
        let hist: Vec<Vec<f64>> = (0..5).map(|k| vec![(k as f64 - 4.0) * 0.5 / 2.0]).collect();
        TrajectoryGrid::with_history(
            0.5,
            grid,
            Layout::scalar(1),
            DeviationMode::Raw,
            vec![0.0],
            vec![1.0],
            &hist,
        )
    }

    #[test]
    fn closed_window_includes_left_end() {
        let t = ramp();
        assert_eq!(t.window_sup_at(0, 0.0, 2.0, 1.0).unwrap(), 1.0);
        assert_eq!(t.window_sup(0, 4, 2, 2).unwrap(), 0.5);
        assert!(matches!(
            t.window_sup_at(0, 0.0, 2.5, 1.0),
            Err(Error::WindowUnderflow { .. })
        ));
    }

    #[test]
    fn constant_and_zero_history() {
        let grid = GridSteps {
            r: 2,
            window: 4,
            horizon: 0,
        };
        let hist = vec![vec![0.3]; 5];
        let t = TrajectoryGrid::with_history(
            0.5,
            grid,
            Layout::scalar(1),
            DeviationMode::Raw,
            vec![0.0],
            vec![1.0],
            &hist,
        );
        assert_eq!(t.window_sup(0, 4, 4, 2).unwrap(), 0.3);
        let z = TrajectoryGrid::with_history(
            0.5,
            grid,
            Layout::scalar(1),
            DeviationMode::Raw,
            vec![0.0],
            vec![1.0],
            &vec![vec![0.0]; 5],
        );
        assert_eq!(z.window_sup(0, 4, 4, 0).unwrap(), 0.0);
    }

    #[test]
    fn csv_shape() {
        let t = ramp();
        let mut buf = Vec::new();
        t.write_csv(&mut buf, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,q_1,x_1,theta_1,tau_1");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].ends_with(",,"));
    }
}
