use serde::{Deserialize, Serialize};

use super::boxes::{BoxSet, Layout};
use super::cournot::CournotGame;
use crate::error::{Error, Result};
use crate::gain::{GainFunction, GainMatrix};
use crate::scalar::Scalar;

/// Best-reply evaluator of a strategic game with box action sets.
///
/// Profiles are flat vectors laid out by [`Game::layout`]. `best_reply(i, q)`
/// must return a point of `S_i` and must not read player `i`'s own block of `q`.
pub trait Game<T: Scalar>: Sync {
    fn layout(&self) -> &Layout;

    fn action_box(&self, i: usize) -> &BoxSet<T>;

    fn best_reply(&self, i: usize, profile: &[T]) -> Vec<T>;

    /// Cournot games expose their closed-form constants through this hook.
    fn as_cournot(&self) -> Option<&CournotGame<T>> {
        None
    }

    fn players(&self) -> usize {
        self.layout().players()
    }

    /// Whether `q` lies in `S = S_1 × … × S_n` up to `tol`.
    fn contains(&self, q: &[T], tol: T) -> bool {
        let layout = self.layout();
        q.len() == layout.total()
            && (0..layout.players()).all(|i| self.action_box(i).contains(layout.slice(q, i), tol))
    }
}

/// The stacked best-reply map `F(q) = (f_1(q_-1), …, f_n(q_-n))`.
pub fn best_reply_map<T: Scalar, G: Game<T> + ?Sized>(game: &G, q: &[T]) -> Result<Vec<T>> {
    let layout = game.layout();
    if q.len() != layout.total() {
        return Err(Error::DimensionMismatch {
            expected: layout.total(),
            got: q.len(),
        });
    }
    if !game.contains(q, T::tol(1e-12)) {
        return Err(Error::Infeasible(format!("profile {q:?} outside S")));
    }
    Ok(stacked_reply(game, q))
}

pub(crate) fn stacked_reply<T: Scalar, G: Game<T> + ?Sized>(game: &G, q: &[T]) -> Vec<T> {
    let layout = game.layout();
    let mut out = vec![T::zero(); layout.total()];
    for i in 0..layout.players() {
        let reply = game.best_reply(i, q);
        layout.slice_mut(&mut out, i).copy_from_slice(&reply);
    }
    out
}

/// A game given by box action sets and an arbitrary best-reply closure.
///
/// Replies are projected onto the player's box, so the range contract of
/// [`Game::best_reply`] holds whatever the closure returns.
pub struct GeneralGame<T, F> {
    layout: Layout,
    boxes: Vec<BoxSet<T>>,
    reply: F,
}

impl<T, F> GeneralGame<T, F>
where
    T: Scalar,
    F: Fn(usize, &[T]) -> Vec<T> + Sync,
{
    pub fn new(boxes: Vec<BoxSet<T>>, reply: F) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::InvalidArgument(
                "a game needs at least one player".into(),
            ));
        }
        let dims: Vec<usize> = boxes.iter().map(BoxSet::dim).collect();
        Ok(Self {
            layout: Layout::from_dims(&dims),
            boxes,
            reply,
        })
    }
}

impl<T, F> Game<T> for GeneralGame<T, F>
where
    T: Scalar,
    F: Fn(usize, &[T]) -> Vec<T> + Sync,
{
    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn action_box(&self, i: usize) -> &BoxSet<T> {
        &self.boxes[i]
    }

    fn best_reply(&self, i: usize, profile: &[T]) -> Vec<T> {
        let raw = (self.reply)(i, profile);
        self.boxes[i].project(&raw)
    }
}

/// Linear reply game with a declared equilibrium.
///
/// All players act in boxes of a common dimension `k` and reply with
///
/// ```text
/// f_i(q_-i) = Pr_{S_i}( q*_i + (1/(n-1)) Σ_{j≠i} c_ij (q_j - q*_j) )
/// ```
///
/// Averaging keeps `|f_i(q_-i) - q*_i| <= max_{j≠i} |c_ij| |q_j - q*_j|`, so the
/// linear gains `γ_ij(s) = |c_ij| s` bound the replies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearReplyGame<T> {
    coefficients: Vec<Vec<T>>,
    boxes: Vec<BoxSet<T>>,
    q_star: Vec<T>,
    #[serde(skip)]
    layout: Option<Layout>,
}

impl<T: Scalar> LinearReplyGame<T> {
    /// `q_star` is given per player; it must lie in the boxes.
    pub fn new(
        coefficients: Vec<Vec<T>>,
        boxes: Vec<BoxSet<T>>,
        q_star: Vec<Vec<T>>,
    ) -> Result<Self> {
        let n = boxes.len();
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "n >= 2 players required, got {n}"
            )));
        }
        if coefficients.len() != n || coefficients.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "coefficient matrix must be {n}x{n}"
            )));
        }
        if coefficients.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("coefficients must be finite".into()));
        }
        let k = boxes[0].dim();
        if boxes.iter().any(|b| b.dim() != k) {
            return Err(Error::InvalidArgument(
                "all action boxes must share one dimension".into(),
            ));
        }
        if q_star.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: q_star.len(),
            });
        }
        for (i, (q, b)) in q_star.iter().zip(&boxes).enumerate() {
            if !b.contains(q, T::zero()) {
                return Err(Error::Infeasible(format!(
                    "q*_{} = {q:?} outside its box",
                    i + 1
                )));
            }
        }
        let layout = Layout::from_dims(&vec![k; n]);
        Ok(Self {
            coefficients,
            boxes,
            q_star: q_star.into_iter().flatten().collect(),
            layout: Some(layout),
        })
    }

    pub fn coefficients(&self) -> &[Vec<T>] {
        &self.coefficients
    }

    /// Declared equilibrium as a flat profile.
    pub fn q_star(&self) -> &[T] {
        &self.q_star
    }

    /// Gains `γ_ij(s) = |c_ij| s`.
    pub fn gain_matrix(&self) -> GainMatrix<T> {
        GainMatrix::from_fn(self.boxes.len(), |i, j| GainFunction::Linear {
            coefficient: self.coefficients[i][j].abs(),
        })
        .expect("absolute coefficients form a valid gain matrix")
    }
}

impl<T: Scalar> Game<T> for LinearReplyGame<T> {
    fn layout(&self) -> &Layout {
        self.layout
            .as_ref()
            .expect("constructed through LinearReplyGame::new")
    }

    fn action_box(&self, i: usize) -> &BoxSet<T> {
        &self.boxes[i]
    }

    fn best_reply(&self, i: usize, profile: &[T]) -> Vec<T> {
        let layout = self.layout();
        let n = layout.players();
        let inv = T::one() / T::of_usize(n - 1);
        let star_i = layout.slice(&self.q_star, i);
        let mut target: Vec<T> = star_i.to_vec();
        for j in (0..n).filter(|&j| j != i) {
            let c = self.coefficients[i][j] * inv;
            if c == T::zero() {
                continue;
            }
            let qj = layout.slice(profile, j);
            let sj = layout.slice(&self.q_star, j);
            for (t, (&q, &s)) in target.iter_mut().zip(qj.iter().zip(sj)) {
                *t += c * (q - s);
            }
        }
        self.boxes[i].project(&target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{CournotGame, CournotParams};

    #[test]
    fn stacked_map_values() {
        let g = CournotGame::validate(CournotParams {
            a: 10.0,
            b: 1.0,
            c: vec![1.0, 1.0],
            k: vec![0.0, 0.0],
            q: vec![5.0, 5.0],
        })
        .unwrap();
        assert_eq!(best_reply_map(&g, &[3.0, 3.0]).unwrap(), vec![3.0, 3.0]);
        assert_eq!(best_reply_map(&g, &[0.0, 0.0]).unwrap(), vec![4.5, 4.5]);
        assert!(best_reply_map(&g, &[-1.0, 0.0]).is_err());
    }

    #[test]
    fn general_game_projects_replies() {
        let boxes = vec![
            BoxSet::interval(0.0, 1.0).unwrap(),
            BoxSet::interval(0.0, 1.0).unwrap(),
        ];
        let g = GeneralGame::new(boxes, |_, _: &[f64]| vec![3.0]).unwrap();
        assert_eq!(best_reply_map(&g, &[0.5, 0.5]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn linear_reply_fixes_declared_equilibrium() {
        let b = BoxSet::new(vec![0.0, 0.0], vec![4.0, 4.0]).unwrap();
        let g = LinearReplyGame::new(
            vec![
                vec![0.0, 0.5, -0.25],
                vec![0.3, 0.0, 0.1],
                vec![-0.2, 0.4, 0.0],
            ],
            vec![b.clone(), b.clone(), b],
            vec![vec![1.0, 2.0], vec![2.0, 2.0], vec![3.0, 0.5]],
        )
        .unwrap();
        let q = g.q_star().to_vec();
        assert_eq!(best_reply_map(&g, &q).unwrap(), q);
        let gains = g.gain_matrix();
        assert_eq!(gains.coefficient(0, 2), Some(0.25));
    }

    #[test]
    fn linear_reply_rejects_equilibrium_outside_box() {
        let b = BoxSet::interval(0.0, 1.0).unwrap();
        let err = LinearReplyGame::new(
            vec![vec![0.0, 0.5], vec![0.5, 0.0]],
            vec![b.clone(), b],
            vec![vec![2.0], vec![0.5]],
        );
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }
}
