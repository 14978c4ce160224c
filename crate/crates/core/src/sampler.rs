//! Trajectory sampling from truncated stationary starts, and empirical
//! estimates to set against the certified enclosures.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::claims::kac_consistency;
use crate::enclosure::Enclosure;
use crate::error::{Error, Result};
use crate::machine::{Alphabet, Edge, Machine, StateKey, Symbol};

/// Blocks used by the delete-a-block jackknife and by batch means.
pub const DEFAULT_BLOCKS: usize = 20;

/// ChaCha8 stream that remembers the seed it was built from.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// `states[k] --symbols[k]--> states[k+1]` is an edge for every `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub seed: u64,
    pub states: Vec<StateKey>,
    pub symbols: Vec<Symbol>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn text(&self, alphabet: &Alphabet) -> String {
        alphabet.render(&self.symbols)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub quantity: String,
    pub estimate: f64,
    pub standard_error: f64,
    pub samples: usize,
    pub exact: Option<Enclosure>,
}

impl EstimateReport {
    pub fn with_exact(mut self, exact: Enclosure) -> Self {
        self.exact = Some(exact);
        self
    }

    /// Distance from the estimate to the exact enclosure in units of the
    /// standard error.
    pub fn z_score(&self) -> Option<f64> {
        let e = self.exact?;
        let d = if self.estimate < e.lower {
            e.lower - self.estimate
        } else if self.estimate > e.upper {
            self.estimate - e.upper
        } else {
            0.0
        };
        Some(if d == 0.0 { 0.0 } else { d / self.standard_error })
    }

    pub fn within(&self, k: f64) -> bool {
        self.z_score().is_some_and(|z| z <= k)
    }
}

/// Pick one edge by inverse CDF.
fn choose_edge<'a>(edges: &'a [Edge], rng: &mut dyn RngCore) -> &'a Edge {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for e in edges {
        acc += e.prob;
        if u < acc {
            return e;
        }
    }
    edges.last().expect("every state has an outgoing edge")
}

/// Redraws allowed when a tail class resolves past the representable indices.
const MAX_REDRAWS: usize = 1000;

/// Inverse-CDF sampler over the ε-truncated stationary vector, renormalized.
///
/// Truncation keeps the shortest prefix of the support holding mass
/// `1 − ε`. Draws are resolved to keys whose expansion is exact along any
/// path; a class key that resolves beyond the representable indices is
/// redrawn, which conditions on the representable states.
pub struct StationarySampler<'a> {
    machine: &'a dyn Machine,
    cdf: Vec<(StateKey, f64)>,
}

impl<'a> StationarySampler<'a> {
    pub fn new(machine: &'a dyn Machine, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Param(format!("eps must lie in (0,1), got {eps}")));
        }
        let support = machine.support(eps, 1);
        let mut cdf = Vec::with_capacity(support.entries.len());
        let mut acc = 0.0;
        for (k, w) in &support.entries {
            acc += w;
            cdf.push((*k, acc));
            if acc >= 1.0 - eps {
                break;
            }
        }
        if acc <= 0.0 {
            return Err(Error::InvalidState("empty support".into()));
        }
        Ok(StationarySampler { machine, cdf })
    }

    pub fn draw(&self, rng: &mut dyn RngCore) -> Result<StateKey> {
        let total = self.cdf.last().map_or(0.0, |&(_, c)| c);
        for _ in 0..MAX_REDRAWS {
            let u = rng.gen::<f64>() * total;
            let idx = self.cdf.partition_point(|&(_, c)| c <= u).min(self.cdf.len() - 1);
            let key = self.machine.resolve(&self.cdf[idx].0, rng);
            if self.machine.is_resolved(&key) {
                return Ok(key);
            }
        }
        Err(Error::InvalidState("stationary draws kept landing beyond representable states".into()))
    }
}

/// One draw from [`StationarySampler`].
pub fn sample_stationary_state(machine: &dyn Machine, rng: &mut dyn RngCore, eps: f64) -> Result<StateKey> {
    StationarySampler::new(machine, eps)?.draw(rng)
}

pub fn sample_path(machine: &dyn Machine, rng: &mut SeededRng, start: StateKey, length: usize) -> Trajectory {
    let mut states = Vec::with_capacity(length + 1);
    let mut symbols = Vec::with_capacity(length);
    let mut s = machine.resolve(&start, rng);
    states.push(s);
    for _ in 0..length {
        let edges = machine.expand(&s);
        let e = choose_edge(&edges, rng);
        symbols.push(e.symbol);
        s = machine.resolve(&e.target, rng);
        states.push(s);
    }
    Trajectory {
        seed: rng.seed(),
        states,
        symbols,
    }
}

/// One trajectory from a stationary start per seed `seed, seed+1, ...`.
pub fn sample_stationary_paths(
    machine: &dyn Machine,
    seed: u64,
    count: usize,
    length: usize,
    eps: f64,
) -> Result<Vec<Trajectory>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = SeededRng::new(seed.wrapping_add(k));
            let start = sample_stationary_state(machine, &mut rng, eps)?;
            Ok(sample_path(machine, &mut rng, start, length))
        })
        .collect()
}

/// Every step of the trajectory follows an edge of the machine.
pub fn trajectory_is_valid(machine: &dyn Machine, tr: &Trajectory) -> bool {
    tr.states.len() == tr.symbols.len() + 1
        && tr.symbols.iter().enumerate().all(|(k, x)| {
            machine
                .expand(&tr.states[k])
                .iter()
                .any(|e| {
                    // class targets are refined by `resolve` after the step
                    e.symbol == *x && (e.target == tr.states[k + 1] || !machine.is_point(&e.target))
                })
        })
}

/// Sliding-window counts of length-`t` words, split into `blocks`
/// contiguous groups of windows.
fn window_counts(trajectories: &[Trajectory], t: usize, blocks: usize) -> Vec<HashMap<Vec<u8>, usize>> {
    let windows: Vec<&[Symbol]> = trajectories
        .iter()
        .flat_map(|tr| if tr.len() >= t { tr.symbols.windows(t).collect() } else { Vec::new() })
        .collect();
    let n = windows.len();
    let blocks = blocks.clamp(1, n.max(1));
    let mut out = vec![HashMap::new(); blocks];
    for (k, w) in windows.into_iter().enumerate() {
        let b = k * blocks / n.max(1);
        *out[b].entry(w.iter().map(|s| s.0).collect()).or_insert(0) += 1;
    }
    out
}

fn plug_in_entropy(counts: &HashMap<Vec<u8>, usize>) -> f64 {
    let n: usize = counts.values().sum();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    counts
        .values()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            -p * p.log2()
        })
        .sum()
}

/// Plug-in `H[X^t]` over sliding windows, with a delete-a-block jackknife
/// standard error.
pub fn empirical_block_entropy(trajectories: &[Trajectory], t: usize) -> Result<EstimateReport> {
    let blocks = window_counts(trajectories, t, DEFAULT_BLOCKS);
    let mut total: HashMap<Vec<u8>, usize> = HashMap::new();
    for b in &blocks {
        for (w, c) in b {
            *total.entry(w.clone()).or_insert(0) += c;
        }
    }
    let samples: usize = total.values().sum();
    if samples == 0 || samples < 10 * total.len() {
        return Err(Error::InsufficientData {
            samples,
            distinct: total.len(),
        });
    }
    let estimate = plug_in_entropy(&total);
    let g = blocks.len();
    let se = if g < 2 {
        0.0
    } else {
        let leave_out: Vec<f64> = blocks
            .iter()
            .map(|b| {
                let mut rest = total.clone();
                for (w, c) in b {
                    *rest.get_mut(w).expect("word counted in total") -= c;
                }
                plug_in_entropy(&rest)
            })
            .collect();
        let mean = leave_out.iter().sum::<f64>() / g as f64;
        let var = leave_out.iter().map(|h| (h - mean).powi(2)).sum::<f64>() * (g - 1) as f64 / g as f64;
        var.sqrt()
    };
    Ok(EstimateReport {
        quantity: format!("H[X^{t}]"),
        estimate,
        standard_error: se,
        samples,
        exact: None,
    })
}

/// Relative frequency of each observed length-`t` word, with batch-means
/// standard errors.
pub fn word_frequencies(trajectories: &[Trajectory], t: usize, batches: usize) -> Vec<(Vec<u8>, EstimateReport)> {
    let blocks = window_counts(trajectories, t, batches);
    let sizes: Vec<f64> = blocks.iter().map(|b| b.values().sum::<usize>() as f64).collect();
    let n: f64 = sizes.iter().sum();
    let mut words: Vec<Vec<u8>> = blocks.iter().flat_map(|b| b.keys().cloned()).collect();
    words.sort();
    words.dedup();
    let g = blocks.len() as f64;
    words
        .into_iter()
        .map(|w| {
            let per: Vec<f64> = blocks
                .iter()
                .zip(&sizes)
                .map(|(b, &s)| b.get(&w).copied().unwrap_or(0) as f64 / s)
                .collect();
            let count: usize = blocks.iter().map(|b| b.get(&w).copied().unwrap_or(0)).sum();
            let f = count as f64 / n;
            let var = per.iter().map(|x| (x - f).powi(2)).sum::<f64>() / (g - 1.0).max(1.0);
            let rep = EstimateReport {
                quantity: format!("P({})", w.iter().map(|s| s.to_string()).collect::<String>()),
                estimate: f,
                standard_error: (var / g).sqrt(),
                samples: n as usize,
                exact: None,
            };
            (w, rep)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ReturnTimes {
    pub report: EstimateReport,
    pub times: Vec<u64>,
}

impl ReturnTimes {
    /// Return times that are odd and greater than one.
    pub fn odd_returns(&self) -> usize {
        self.times.iter().filter(|&&r| r > 1 && r % 2 == 1).count()
    }
}

/// Mean of `n` successive return times to `state` (a point state), set
/// against the Kac time `1/π(state)`.
pub fn mean_return_time(machine: &dyn Machine, rng: &mut SeededRng, state: StateKey, n: usize) -> Result<ReturnTimes> {
    if n == 0 {
        return Err(Error::Param("need at least one return".into()));
    }
    if !machine.is_point(&state) {
        return Err(Error::InvalidState(machine.label(&state)));
    }
    let mut times = Vec::with_capacity(n);
    let mut s = state;
    let mut steps = 0u64;
    while times.len() < n {
        let edges = machine.expand(&s);
        s = machine.resolve(&choose_edge(&edges, rng).target, rng);
        steps += 1;
        if s == state {
            times.push(steps);
            steps = 0;
        }
    }
    let nf = n as f64;
    let mean = times.iter().sum::<u64>() as f64 / nf;
    let var = times.iter().map(|&r| (r as f64 - mean).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
    let report = EstimateReport {
        quantity: format!("E[return to {}]", machine.label(&state)),
        estimate: mean,
        standard_error: (var / nf).sqrt(),
        samples: n,
        exact: Some(kac_consistency(machine, &state, 1e-9)?),
    };
    Ok(ReturnTimes { report, times })
}

/// One record per trajectory, one glyph per symbol, newline-terminated.
pub fn trajectories_text(trajectories: &[Trajectory], alphabet: &Alphabet) -> String {
    let mut out = String::new();
    for tr in trajectories {
        out.push_str(&tr.text(alphabet));
        out.push('\n');
    }
    out
}

/// Writes `text` to a temporary file beside `path`, renamed into place on
/// success, so a failed run leaves no partial file.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_trajectories(path: &Path, trajectories: &[Trajectory], alphabet: &Alphabet) -> Result<()> {
    write_atomic(path, &trajectories_text(trajectories, alphabet))
}
