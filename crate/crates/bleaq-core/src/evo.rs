//! Evolutionary operators shared by the upper- and lower-level searches.
//!
//! Selection uses constraint domination (a feasible point always beats an
//! infeasible one; two infeasible points compare by violation; two feasible
//! points compare by objective). Recombination is parent-centric crossover
//! (PCX) around an index parent, variation is bounded polynomial mutation,
//! and survivor selection replaces `r` randomly chosen slots with the best of
//! `r` incumbents + `λ` offsprings.

use alloc::vec::Vec;
use core::cmp::Ordering;

// Inherent float methods win under `std`; this supplies them for no_std.
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::problem::Bounds;

/// Steady-state EA parameters used at both levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvoParams {
    /// Parents per recombination (index parent + `mu - 1` others).
    pub mu: usize,
    /// Offsprings created per generation.
    pub lambda: usize,
    /// Population slots contested by the offsprings each generation.
    pub r: usize,
    /// Probability that an offspring is produced by PCX rather than cloning
    /// the index parent.
    pub crossover_prob: f64,
    /// Probability that an offspring is mutated at all (the operator then
    /// mutates each variable with probability `1/dim`).
    pub mutation_prob: f64,
    /// PCX scale on the index-parent direction term.
    pub omega_xi: f64,
    /// PCX scale on the inter-parent (orthogonal-spread) term.
    pub omega_eta: f64,
    /// Distribution index of polynomial mutation.
    pub eta_m: f64,
}

impl Default for EvoParams {
    fn default() -> Self {
        EvoParams {
            mu: 3,
            lambda: 2,
            r: 2,
            crossover_prob: 0.9,
            mutation_prob: 0.1,
            omega_xi: 0.1,
            omega_eta: 0.1,
            eta_m: 20.0,
        }
    }
}

/// The (violation, objective) pair a comparison looks at.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scored {
    /// Constraint violation sum; `0.0` means feasible.
    pub cv: f64,
    /// Objective value (minimized).
    pub value: f64,
}

/// Constraint-domination ordering: `Less` means `a` is strictly better.
///
/// Rules: a feasible point beats an infeasible one; two infeasible points
/// compare by violation; two feasible points compare by objective. `Equal`
/// is a genuine tie — callers resolve it in favor of their first argument.
pub fn constraint_cmp(a: Scored, b: Scored) -> Ordering {
    match (a.cv == 0.0, b.cv == 0.0) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => a.cv.total_cmp(&b.cv),
        (true, true) => a.value.total_cmp(&b.value),
    }
}

/// Whether `a` survives a pairwise comparison against `b` (ties go to `a`).
pub fn first_wins(a: Scored, b: Scored) -> bool {
    constraint_cmp(a, b) != Ordering::Greater
}

/// Binary-tournament selection: draws `2k` distinct members from `scores`,
/// pairs them in draw order, and returns the `k` pairwise winners' indices.
///
/// Panics if the pool holds fewer than `2k` members.
pub fn tournament_select<R: Rng + ?Sized>(scores: &[Scored], k: usize, rng: &mut R) -> Vec<usize> {
    assert!(
        scores.len() >= 2 * k,
        "tournament needs at least {} members, pool has {}",
        2 * k,
        scores.len()
    );
    let drawn = rand::seq::index::sample(rng, scores.len(), 2 * k);
    (0..k)
        .map(|i| {
            let (a, b) = (drawn.index(2 * i), drawn.index(2 * i + 1));
            if first_wins(scores[a], scores[b]) {
                a
            } else {
                b
            }
        })
        .collect()
}

/// Parent-centric crossover around `parents[index]`.
///
/// With centroid `g` of all `μ` parents and direction `d = p - g`, the
/// offspring is `p + ω_ξ·ξ·d + ω_η·η·(p2 - p1)/2`, where `p1, p2` are the
/// two non-index parents and `ξ, η` are independent standard normal draws
/// (one pair per offspring); the result is clamped into `bounds`. Both terms
/// scale with the spread of the parents themselves, so offsprings contract
/// together with the population — that is what lets the variance-based
/// termination criteria actually fire. Identical parents reproduce exactly.
pub fn pcx_crossover<R: Rng + ?Sized>(
    parents: &[&[f64]],
    index: usize,
    bounds: &Bounds,
    params: &EvoParams,
    rng: &mut R,
) -> Vec<f64> {
    assert!(parents.len() >= 3, "PCX needs at least three parents");
    assert!(index < parents.len());
    let dim = parents[index].len();

    let mut g = alloc::vec![0.0; dim];
    for p in parents {
        for (gi, &pi) in g.iter_mut().zip(p.iter()) {
            *gi += pi;
        }
    }
    for gi in g.iter_mut() {
        *gi /= parents.len() as f64;
    }

    let p = parents[index];
    let d: Vec<f64> = p.iter().zip(g.iter()).map(|(&pi, &gi)| pi - gi).collect();

    let mut others = parents.iter().enumerate().filter(|&(i, _)| i != index);
    let p1 = others.next().expect("two non-index parents").1;
    let p2 = others.next().expect("two non-index parents").1;

    let xi: f64 = StandardNormal.sample(rng);
    let eta: f64 = StandardNormal.sample(rng);

    let mut child: Vec<f64> = (0..dim)
        .map(|i| p[i] + params.omega_xi * xi * d[i] + params.omega_eta * eta * (p2[i] - p1[i]) / 2.0)
        .collect();
    bounds.clamp(&mut child);
    child
}

/// Bounded polynomial mutation with distribution index `eta_m`.
///
/// Each variable mutates independently with probability `per_var_prob`;
/// the perturbation shape follows the standard two-sided polynomial
/// distribution so the result stays inside `bounds` by construction.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    x: &mut [f64],
    bounds: &Bounds,
    per_var_prob: f64,
    eta_m: f64,
    rng: &mut R,
) {
    debug_assert_eq!(x.len(), bounds.dim());
    for i in 0..x.len() {
        if rng.random_range(0.0..1.0) >= per_var_prob {
            continue;
        }
        let (lo, hi) = (bounds.lo(i), bounds.hi(i));
        let range = hi - lo;
        if range == 0.0 {
            continue;
        }
        let d1 = (x[i] - lo) / range;
        let d2 = (hi - x[i]) / range;
        let u: f64 = rng.random_range(0.0..1.0);
        let mpow = 1.0 / (eta_m + 1.0);
        let dq = if u <= 0.5 {
            let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta_m + 1.0);
            val.powf(mpow) - 1.0
        } else {
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta_m + 1.0);
            1.0 - val.powf(mpow)
        };
        x[i] = (x[i] + dq * range).max(lo).min(hi);
    }
}

/// Steady-state survivor selection: `r` distinct random slots (never the
/// `protect`ed one) are pooled with the offsprings; the pool's `r` best by
/// constraint domination are written back into those slots. Ties favor
/// incumbents. The population's best member can never be lost: either its
/// slot is untouched, or it wins its place in the pool.
///
/// An offspring identical to a current member (or to an earlier offspring)
/// is discarded: admitting clones floods the population with copies of the
/// best member, after which recombination degenerates to exact reproduction
/// and the search freezes at whatever precision it had reached.
pub fn population_update<T, S, R>(
    population: &mut [T],
    offsprings: &[T],
    r: usize,
    protect: Option<usize>,
    score: S,
    rng: &mut R,
) where
    T: Clone + PartialEq,
    S: Fn(&T) -> Scored,
    R: Rng + ?Sized,
{
    let n = population.len();
    let selectable = n - usize::from(protect.is_some());
    assert!(r <= selectable, "cannot contest {r} of {selectable} free slots");

    let slots: Vec<usize> = rand::seq::index::sample(rng, selectable, r)
        .iter()
        .map(|j| match protect {
            Some(p) if j >= p => j + 1,
            _ => j,
        })
        .collect();

    let mut pool: Vec<T> = slots.iter().map(|&s| population[s].clone()).collect();
    for off in offsprings {
        if population.iter().any(|m| m == off) || pool.iter().any(|m| m == off) {
            continue;
        }
        pool.push(off.clone());
    }
    pool.sort_by(|a, b| constraint_cmp(score(a), score(b)));

    for (slot, member) in slots.into_iter().zip(pool.into_iter()) {
        population[slot] = member;
    }
}

/// Per-coordinate population variance (biased, divides by the count).
pub fn population_variance<'a, I>(points: I, dim: usize) -> Vec<f64>
where
    I: Iterator<Item = &'a [f64]> + Clone,
{
    let n = points.clone().count();
    assert!(n > 0, "variance of an empty population");
    let mut mean = alloc::vec![0.0; dim];
    for p in points.clone() {
        for (m, &v) in mean.iter_mut().zip(p.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut var = alloc::vec![0.0; dim];
    for p in points {
        for i in 0..dim {
            let d = p[i] - mean[i];
            var[i] += d * d;
        }
    }
    for v in var.iter_mut() {
        *v /= n as f64;
    }
    var
}
