//! Exact checks of the chunk factorization on a small discrete AR model.
//!
//! With symbols in `0..S` and conditionals depending on the last `c`
//! symbols, every quantity is a finite product and every expectation a finite
//! sum, so the identities
//!
//! ```text
//! q(x_{(i,j]} | x_{≤i}, m) = p(x_{(i,j]} | x_{≤i}) · R
//! E_p[−log q] = E_p[−log p] + E_p[−log R]
//! ```
//!
//! can be checked to rounding error.

use crate::checks::CheckResult;
use crate::error::{NaraError, Result};
use crate::rng::seeded;
use rand::Rng;

pub type Symbol = usize;

/// Largest number of chunks [`objective_decomposition`] will enumerate.
pub const MAX_ENUMERATION: u128 = 729;

/// Conditional table `p(x | last c symbols)`; shorter histories are padded
/// on the left with symbol 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteAr {
    alphabet: usize,
    order: usize,
    /// `S^c` rows of `S` probabilities
    table: Vec<f64>,
}

/// The approximate conditional `q_φ`. Same shape as [`DiscreteAr`].
pub type DiscreteQ = DiscreteAr;

impl DiscreteAr {
    pub fn new(alphabet: usize, order: usize, table: Vec<f64>) -> Result<Self> {
        if alphabet < 2 {
            return Err(NaraError::Invalid("alphabet needs at least 2 symbols".into()));
        }
        let rows = alphabet.pow(order as u32);
        if table.len() != rows * alphabet {
            return Err(NaraError::shape(rows * alphabet, table.len()));
        }
        for row in table.chunks(alphabet) {
            if row.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(NaraError::ZeroProbability("conditional table entry"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(NaraError::Invalid(format!("conditional row sums to {sum}")));
            }
        }
        Ok(Self { alphabet, order, table })
    }

    /// Rows with entries uniform in [0.05, 1), normalized.
    pub fn random<R: Rng + ?Sized>(alphabet: usize, order: usize, rng: &mut R) -> Result<Self> {
        let rows = alphabet.pow(order as u32);
        let mut table = Vec::with_capacity(rows * alphabet);
        for _ in 0..rows {
            let row: Vec<f64> = (0..alphabet).map(|_| rng.random_range(0.05..1.0)).collect();
            let sum: f64 = row.iter().sum();
            let mut row: Vec<f64> = row.iter().map(|v| v / sum).collect();
            // put the rounding residue on the largest entry
            let resid = 1.0 - row.iter().sum::<f64>();
            let k = (0..alphabet).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(0);
            row[k] += resid;
            table.extend(row);
        }
        Self::new(alphabet, order, table)
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut [f64] {
        &mut self.table
    }

    fn row_index(&self, history: &[Symbol]) -> usize {
        (0..self.order).fold(0, |acc, k| {
            // k-th of the last `order` symbols, oldest first
            let back = self.order - k;
            let s = if history.len() >= back { history[history.len() - back] } else { 0 };
            acc * self.alphabet + s
        })
    }

    /// Conditional distribution after `history`.
    pub fn row(&self, history: &[Symbol]) -> &[f64] {
        let r = self.row_index(history);
        &self.table[r * self.alphabet..(r + 1) * self.alphabet]
    }

    pub fn cond(&self, history: &[Symbol], x: Symbol) -> Result<f64> {
        if x >= self.alphabet || history.iter().any(|&s| s >= self.alphabet) {
            return Err(NaraError::Invalid(format!("symbol outside alphabet of {}", self.alphabet)));
        }
        let v = self.row(history)[x];
        if v > 0.0 {
            Ok(v)
        } else {
            Err(NaraError::ZeroProbability("conditional"))
        }
    }

    /// `log p(seq)` by the chain rule from the empty history.
    pub fn log_joint(&self, seq: &[Symbol]) -> Result<f64> {
        let mut lp = 0.0;
        for t in 0..seq.len() {
            lp += self.cond(&seq[..t], seq[t])?.ln();
        }
        Ok(lp)
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.alphabet != other.alphabet || self.order != other.order {
            return Err(NaraError::Invalid("p and q tables have different shapes".into()));
        }
        Ok(())
    }
}

fn check_inputs(q: &DiscreteQ, p: &DiscreteAr, context: &[Symbol], priors: &[Symbol], len: usize) -> Result<()> {
    p.same_shape(q)?;
    if context.is_empty() {
        return Err(NaraError::Empty("context"));
    }
    if len == 0 {
        return Err(NaraError::Empty("chunk"));
    }
    if priors.len() + 1 < len {
        return Err(NaraError::shape(len - 1, priors.len()));
    }
    Ok(())
}

fn concat(a: &[Symbol], b: &[Symbol]) -> Vec<Symbol> {
    a.iter().chain(b).copied().collect()
}

/// `p(x_{i+1} | x_{≤i}) · ∏_{l≥2} q(x_l | x_{≤i}, m_{i+1}, …, m_{l−1})`.
pub fn q_product(q: &DiscreteQ, p: &DiscreteAr, context: &[Symbol], priors: &[Symbol], chunk: &[Symbol]) -> Result<f64> {
    check_inputs(q, p, context, priors, chunk.len())?;
    let mut prob = p.cond(context, chunk[0])?;
    for l in 1..chunk.len() {
        prob *= q.cond(&concat(context, &priors[..l]), chunk[l])?;
    }
    Ok(prob)
}

/// `p(x_{(i,j]} | x_{≤i})` by the chain rule.
pub fn p_chunk(p: &DiscreteAr, context: &[Symbol], chunk: &[Symbol]) -> Result<f64> {
    let mut prob = 1.0;
    let mut hist = context.to_vec();
    for &x in chunk {
        prob *= p.cond(&hist, x)?;
        hist.push(x);
    }
    Ok(prob)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerValue {
    pub log_r: f64,
    /// one log-ratio per chunk position after the first
    pub log_factors: Vec<f64>,
}

/// `log q_joint(x_{≤i}, m_{i+1}, …, m_{i+k})`: the first prior is scored by
/// `p`, later ones by `q`.
fn log_q_joint(q: &DiscreteQ, p: &DiscreteAr, context: &[Symbol], tail: &[Symbol]) -> Result<f64> {
    let mut lp = p.log_joint(context)?;
    for k in 0..tail.len() {
        let hist = concat(context, &tail[..k]);
        lp += if k == 0 { p.cond(&hist, tail[k])? } else { q.cond(&hist, tail[k])? }.ln();
    }
    Ok(lp)
}

/// The ratio product `R` with `q = p · R`, built from joint probabilities:
/// factor `k` is
/// `[p(x_{≤i+k−1}) / q(x_{≤i}, m_{<k})] · [q(x_{≤i}, m_{<k}, x_k) / p(x_{≤i+k})]`.
pub fn regularizer(
    q: &DiscreteQ,
    p: &DiscreteAr,
    context: &[Symbol],
    priors: &[Symbol],
    chunk: &[Symbol],
) -> Result<RegularizerValue> {
    check_inputs(q, p, context, priors, chunk.len())?;
    let mut log_factors = Vec::with_capacity(chunk.len().saturating_sub(1));
    for k in 1..chunk.len() {
        let m = &priors[..k];
        let mut with_x = m.to_vec();
        with_x.push(chunk[k]);
        let p_prev = p.log_joint(&concat(context, &chunk[..k]))?;
        let p_next = p.log_joint(&concat(context, &chunk[..=k]))?;
        let q_prev = log_q_joint(q, p, context, m)?;
        let q_next = log_q_joint(q, p, context, &with_x)?;
        log_factors.push((p_prev - q_prev) + (q_next - p_next));
    }
    Ok(RegularizerValue {
        log_r: log_factors.iter().sum(),
        log_factors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub expected_nll_p: f64,
    pub expected_neg_log_r: f64,
    pub expected_nll_q: f64,
}

impl Decomposition {
    pub fn residual(&self) -> f64 {
        (self.expected_nll_q - self.expected_nll_p - self.expected_neg_log_r).abs()
    }
}

/// All `S^len` chunks in lexicographic order.
pub fn enumerate_chunks(alphabet: usize, len: usize) -> Result<Vec<Vec<Symbol>>> {
    let paths = (alphabet as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if paths > MAX_ENUMERATION {
        return Err(NaraError::EnumerationTooLarge {
            paths,
            bound: MAX_ENUMERATION,
        });
    }
    let mut out = vec![Vec::with_capacity(len)];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|c| {
                (0..alphabet).map(move |s| {
                    let mut n = c.clone();
                    n.push(s);
                    n
                })
            })
            .collect();
    }
    Ok(out)
}

/// Priors used while enumerating chunks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Priors<'a> {
    Fixed(&'a [Symbol]),
    /// `m = x` for every enumerated chunk
    MatchChunk,
}

/// `(E_p[−log p], E_p[−log R], E_p[−log q])` over chunks of length `len`,
/// by exhaustive enumeration.
pub fn objective_decomposition(
    q: &DiscreteQ,
    p: &DiscreteAr,
    context: &[Symbol],
    priors: Priors<'_>,
    len: usize,
) -> Result<Decomposition> {
    let fixed = match priors {
        Priors::Fixed(m) => m,
        Priors::MatchChunk => &vec![0; len.saturating_sub(1)][..],
    };
    check_inputs(q, p, context, fixed, len)?;
    let mut d = Decomposition {
        expected_nll_p: 0.0,
        expected_neg_log_r: 0.0,
        expected_nll_q: 0.0,
    };
    for chunk in enumerate_chunks(p.alphabet(), len)? {
        let m = match priors {
            Priors::Fixed(m) => m,
            Priors::MatchChunk => &chunk[..len - 1],
        };
        let pc = p_chunk(p, context, &chunk)?;
        d.expected_nll_p -= pc * pc.ln();
        d.expected_neg_log_r -= pc * regularizer(q, p, context, m, &chunk)?.log_r;
        d.expected_nll_q -= pc * q_product(q, p, context, m, &chunk)?.ln();
    }
    Ok(d)
}

/// Brute-force joint over the full sequence `context ⧺ chunk` under the
/// approximate process, normalized over all chunks of the same length.
pub fn brute_force_q(
    q: &DiscreteQ,
    p: &DiscreteAr,
    context: &[Symbol],
    priors: &[Symbol],
    len: usize,
) -> Result<Vec<(Vec<Symbol>, f64)>> {
    check_inputs(q, p, context, priors, len)?;
    let chunks = enumerate_chunks(p.alphabet(), len)?;
    let weights = chunks
        .iter()
        .map(|c| {
            let mut lw = p.log_joint(&concat(context, &c[..1]))?;
            for l in 1..c.len() {
                lw += q.cond(&concat(context, &priors[..l]), c[l])?.ln();
            }
            Ok(lw.exp())
        })
        .collect::<Result<Vec<f64>>>()?;
    let z: f64 = weights.iter().sum();
    Ok(chunks.into_iter().zip(weights.into_iter().map(|w| w / z)).collect())
}

/// Brute-force `p(chunk | context)`: the full-sequence joint normalized over
/// all continuations.
pub fn brute_force_p(p: &DiscreteAr, context: &[Symbol], len: usize) -> Result<Vec<(Vec<Symbol>, f64)>> {
    let chunks = enumerate_chunks(p.alphabet(), len)?;
    let weights = chunks
        .iter()
        .map(|c| Ok(p.log_joint(&concat(context, c))?.exp()))
        .collect::<Result<Vec<f64>>>()?;
    let z: f64 = weights.iter().sum();
    Ok(chunks.into_iter().zip(weights.into_iter().map(|w| w / z)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryInstance {
    pub p: DiscreteAr,
    pub q: DiscreteQ,
    pub context: Vec<Symbol>,
    pub priors: Vec<Symbol>,
    pub chunk: Vec<Symbol>,
}

impl TheoryInstance {
    /// Random tables and uniformly drawn context, priors and chunk.
    pub fn random<R: Rng + ?Sized>(alphabet: usize, order: usize, chunk_len: usize, rng: &mut R) -> Result<Self> {
        let p = DiscreteAr::random(alphabet, order, rng)?;
        let q = DiscreteAr::random(alphabet, order, rng)?;
        let ctx_len = rng.random_range(1..=4);
        let mut sym = |n: usize| (0..n).map(|_| rng.random_range(0..alphabet)).collect::<Vec<_>>();
        Ok(Self {
            p,
            q,
            context: sym(ctx_len),
            priors: sym(chunk_len.saturating_sub(1)),
            chunk: sym(chunk_len),
        })
    }
}

pub const THEORY_INSTANCES: u64 = 100;

/// The theory suite: factorization identity, extremum, decomposition and the
/// brute-force match, each over random instances with `S = 3`, `c = 2`.
pub fn run_theory_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded(seed);
    let (s, c) = (3, 2);
    let mut identity = CheckResult::new("log q = log p + log R (general q)", 1e-10);
    let mut identity_shared = CheckResult::new("log q = log p + log R (q = p, m != x)", 1e-10);
    let mut extremum = CheckResult::new("log R = 0 at m = x, q = p", 1e-12);
    let mut decomposition = CheckResult::new("E[-log q] = E[-log p] + E[-log R]", 1e-10);
    let mut brute = CheckResult::new("q_product vs brute-force joint", 1e-12);
    let mut brute_p = CheckResult::new("p chunk vs brute-force joint", 1e-12);

    for _ in 0..THEORY_INSTANCES {
        let len = rng.random_range(1..=4);
        let inst = TheoryInstance::random(s, c, len, &mut rng)?;
        let (p, q) = (&inst.p, &inst.q);

        let lq = q_product(q, p, &inst.context, &inst.priors, &inst.chunk)?.ln();
        let lp = p_chunk(p, &inst.context, &inst.chunk)?.ln();
        let r = regularizer(q, p, &inst.context, &inst.priors, &inst.chunk)?;
        identity.observe((lq - lp - r.log_r).abs());

        let lq_shared = q_product(p, p, &inst.context, &inst.priors, &inst.chunk)?.ln();
        let r_shared = regularizer(p, p, &inst.context, &inst.priors, &inst.chunk)?;
        identity_shared.observe((lq_shared - lp - r_shared.log_r).abs());

        let m_eq_x = &inst.chunk[..len - 1];
        extremum.observe(regularizer(p, p, &inst.context, m_eq_x, &inst.chunk)?.log_r.abs());

        decomposition.observe(objective_decomposition(q, p, &inst.context, Priors::Fixed(&inst.priors), len)?.residual());

        for (chunk, prob) in brute_force_q(q, p, &inst.context, &inst.priors, len)? {
            brute.observe((q_product(q, p, &inst.context, &inst.priors, &chunk)? - prob).abs());
        }
        for (chunk, prob) in brute_force_p(p, &inst.context, len)? {
            brute_p.observe((p_chunk(p, &inst.context, &chunk)? - prob).abs());
        }
    }
    Ok(vec![identity, identity_shared, extremum, decomposition, brute, brute_p])
}
