use crate::error::{Error, Result};
use crate::game::{clamp, deviation_scale, CournotGame, DeviationMode, Game, Layout, NashPoint};
use crate::scalar::{max_abs_diff, Scalar};

struct ScaledCournot<T> {
    l: Vec<T>,
    m: Vec<T>,
    r: Vec<T>,
    /// `g_ij`, row-major.
    g: Vec<T>,
    /// `clamp01(M_i - R_i Σ g_ij L_j)`, equal to `L_i` up to the Nash residual.
    l_hat: Vec<T>,
}

/// Right-hand side of the deviation equations around a Nash point.
///
/// `Scaled` evaluates the dimensionless Cournot form
/// `x_i = θ clamp(x_i(t-τ), -L_i, 1-L_i) + (1-θ)(clamp01(M_i - R_i Σ g_ij e_j) - L̂_i)`
/// with `e_j = clamp01(L_j + d_ij s_j)`. `Raw` evaluates the general form
/// `x_i = θ(Pr(x_i(t-τ) + q*_i) - q*_i) + (1-θ)(f_i(Pr(q*_j + d_ij s_j)) - f_i(q*_-i))`.
///
/// Both subtract the reply at `q*` rather than `q*` itself, so a zero history
/// stays exactly zero even when `q*` carries a small solver residual.
pub struct DeviationSystem<'g, T, G: ?Sized> {
    game: &'g G,
    mode: DeviationMode,
    q_star: Vec<T>,
    scale: Vec<T>,
    reply_star: Vec<T>,
    slack: T,
    cournot: Option<ScaledCournot<T>>,
    bound: Option<Vec<T>>,
}

impl<'g, T: Scalar, G: Game<T> + ?Sized> DeviationSystem<'g, T, G> {
    pub fn new(game: &'g G, nash: &NashPoint<T>, mode: DeviationMode) -> Result<Self> {
        let layout = game.layout();
        if nash.q_star.len() != layout.total() {
            return Err(Error::DimensionMismatch {
                expected: layout.total(),
                got: nash.q_star.len(),
            });
        }
        if !game.contains(&nash.q_star, T::zero()) {
            return Err(Error::Infeasible(format!(
                "q* = {:?} outside S",
                nash.q_star
            )));
        }
        let scale = deviation_scale(game, mode)?;
        let reply_star = crate::game::stacked_reply(game, &nash.q_star);
        let residual = max_abs_diff(&reply_star, &nash.q_star);
        let min_scale = scale.iter().copied().fold(T::infinity(), T::min);
        let slack = T::tol(1e-12) + residual / min_scale;
        let cournot = match mode {
            DeviationMode::Scaled => Some(ScaledCournot::new(
                game.as_cournot().expect("checked by deviation_scale"),
                &nash.q_star,
            )),
            DeviationMode::Raw => None,
        };
        // Cournot replies move by at most R_i Σ_j |Δq_j|; in scaled units R_i Σ g_ij |Δx_j|.
        let bound = game.as_cournot().map(|c| match mode {
            DeviationMode::Scaled => (0..c.n())
                .flat_map(|i| {
                    (0..c.n()).map(move |j| {
                        if i == j {
                            T::zero()
                        } else {
                            c.r()[i] * c.g(i, j)
                        }
                    })
                })
                .collect(),
            DeviationMode::Raw => (0..c.n())
                .flat_map(|i| (0..c.n()).map(move |j| if i == j { T::zero() } else { c.r()[i] }))
                .collect(),
        });
        Ok(Self {
            game,
            mode,
            q_star: nash.q_star.clone(),
            scale,
            reply_star,
            slack,
            cournot,
            bound,
        })
    }

    pub fn game(&self) -> &G {
        self.game
    }

    pub fn layout(&self) -> &Layout {
        self.game.layout()
    }

    pub fn players(&self) -> usize {
        self.layout().players()
    }

    pub fn mode(&self) -> DeviationMode {
        self.mode
    }

    pub fn q_star(&self) -> &[T] {
        &self.q_star
    }

    pub fn scale(&self) -> &[T] {
        &self.scale
    }

    /// `F(q*)`, cached.
    pub fn reply_star(&self) -> &[T] {
        &self.reply_star
    }

    /// Tolerance of the range check, widened by the Nash residual.
    pub fn range_slack(&self) -> T {
        self.slack
    }

    /// Coefficient `c_ij` of the per-step bound
    /// `|x_i| <= θ ‖x_i‖ + (1-θ) Σ_j c_ij s_j`, known for Cournot games.
    pub fn step_bound_coefficient(&self, i: usize, j: usize) -> Option<T> {
        self.bound.as_ref().map(|b| b[i * self.players() + j])
    }

    /// Evaluates player `i`. `d` is flat (`d_ij` in block `j`), `sups` holds
    /// the link window suprema in mode units; entries for `j = i` are ignored.
    pub fn evaluate(&self, i: usize, theta: T, delayed: &[T], d: &[T], sups: &[T], out: &mut [T]) {
        let layout = self.game.layout();
        let keep = T::one() - theta;
        if let Some(c) = &self.cournot {
            let n = self.players();
            let mut aggregate = T::zero();
            for j in (0..n).filter(|&j| j != i) {
                let e = clamp(c.l[j] + d[j] * sups[j], T::zero(), T::one());
                aggregate += c.g[i * n + j] * e;
            }
            let reply = clamp(c.m[i] - c.r[i] * aggregate, T::zero(), T::one()) - c.l_hat[i];
            let own = clamp(delayed[0], -c.l[i], T::one() - c.l[i]);
            out[0] = theta * own + keep * reply;
            return;
        }
        let mut exp = self.q_star.clone();
        for j in (0..self.players()).filter(|&j| j != i) {
            let range = layout.range(j);
            let raw: Vec<T> = self.q_star[range.clone()]
                .iter()
                .zip(&d[range.clone()])
                .map(|(&q, &dj)| q + dj * sups[j])
                .collect();
            self.game.action_box(j).project_into(&raw, &mut exp[range]);
        }
        let reply = self.game.best_reply(i, &exp);
        let star = layout.slice(&self.q_star, i);
        let reply_star = layout.slice(&self.reply_star, i);
        let shifted: Vec<T> = delayed.iter().zip(star).map(|(&x, &q)| x + q).collect();
        let own = self.game.action_box(i).project(&shifted);
        for (k, o) in out.iter_mut().enumerate() {
            *o = theta * (own[k] - star[k]) + keep * (reply[k] - reply_star[k]);
        }
    }

    /// Whether `x_i` corresponds to a point of `S_i`, up to [`range_slack`](Self::range_slack).
    pub fn in_range(&self, i: usize, xi: &[T]) -> bool {
        let tol = self.slack;
        if let Some(c) = &self.cournot {
            return xi[0] >= -c.l[i] - tol && xi[0] <= T::one() - c.l[i] + tol;
        }
        let layout = self.game.layout();
        let b = self.game.action_box(i);
        let star = layout.slice(&self.q_star, i);
        xi.iter()
            .zip(star)
            .zip(b.lo.iter().zip(&b.hi))
            .all(|((&x, &q), (&lo, &hi))| x + q >= lo - tol && x + q <= hi + tol)
    }

    pub(crate) fn to_raw_sup(&self, j: usize, s: T) -> T {
        match self.mode {
            DeviationMode::Scaled => s * self.scale[self.layout().range(j).start],
            DeviationMode::Raw => s,
        }
    }
}

impl<T: Scalar> ScaledCournot<T> {
    fn new(game: &CournotGame<T>, q_star: &[T]) -> Self {
        let n = game.n();
        let l: Vec<T> = q_star
            .iter()
            .zip(game.capacities())
            .map(|(&q, &cap)| q / cap)
            .collect();
        let m: Vec<T> = (0..n).map(|i| game.m_constant(i)).collect();
        let r = game.r().to_vec();
        let g: Vec<T> = (0..n)
            .flat_map(|i| (0..n).map(move |j| game.g(i, j)))
            .collect();
        let l_hat = (0..n)
            .map(|i| {
                let agg: T = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| g[i * n + j] * l[j])
                    .sum();
                clamp(m[i] - r[i] * agg, T::zero(), T::one())
            })
            .collect();
        Self { l, m, r, g, l_hat }
    }
}
