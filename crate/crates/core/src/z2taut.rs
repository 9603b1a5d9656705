//! Z₂-taut structures: one quad per tetrahedron, chosen so that every edge
//! meets an even number of chosen quads (counted with `i(e, q)`).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::complex::Triangulation;
use crate::error::{Error, Result};

/// Above this many tetrahedra the total is only counted on request.
pub const EXACT_COUNT_MAX_TETS: usize = 20;

/// `f: □ → {0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Z2Assignment {
    pub f: Vec<u8>,
}

impl Z2Assignment {
    /// The quad chosen in each tetrahedron, given as `0..3` per tetrahedron.
    pub fn from_choices(choices: &[u8]) -> Self {
        let mut f = vec![0; 3 * choices.len()];
        for (t, &k) in choices.iter().enumerate() {
            f[3 * t + k as usize] = 1;
        }
        Z2Assignment { f }
    }

    /// Quads with `f = 1`, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.f.len()).filter(|&q| self.f[q] == 1).collect()
    }
}

impl Serialize for Z2Assignment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.support().serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Z2Check {
    /// Tetrahedra without exactly one chosen quad.
    pub bad_tets: Vec<usize>,
    /// Edges with odd `Σ_q i(e,q) f(q)`.
    pub odd_edges: Vec<usize>,
}

impl Z2Check {
    pub fn valid(&self) -> bool {
        self.bad_tets.is_empty() && self.odd_edges.is_empty()
    }
}

pub fn check(tri: &Triangulation, f: &Z2Assignment) -> Z2Check {
    let bad_tets = (0..tri.num_tets())
        .filter(|&t| f.f[3 * t..3 * t + 3].iter().map(|&x| x as u32).sum::<u32>() != 1)
        .collect();
    let inc = tri.incidence();
    let odd_edges = (0..tri.num_edges())
        .filter(|&e| {
            (0..tri.num_quads())
                .map(|q| inc.get(e, q) as u32 * f.f[q] as u32)
                .sum::<u32>()
                % 2
                == 1
        })
        .collect();
    Z2Check { bad_tets, odd_edges }
}

/// Edge-parity constraints that failed at the greatest search depth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeepestFailure {
    /// Number of tetrahedra assigned when the constraints failed.
    pub depth: usize,
    pub edges: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TautEnumeration {
    /// Exact number of structures, when the search ran to completion.
    pub count: Option<u64>,
    pub structures: Vec<Z2Assignment>,
    /// Only reported when the complete search found nothing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deepest_failure: Option<DeepestFailure>,
}

type Bits = Vec<u64>;

fn bits_zero(n: usize) -> Bits {
    vec![0; n.div_ceil(64).max(1)]
}

fn xor_into(a: &mut Bits, b: &Bits) {
    for (x, y) in a.iter_mut().zip(b) {
        *x ^= y;
    }
}

/// Search tables: edge parities flipped by each choice, and the edges whose
/// parity is final once a given tetrahedron is assigned.
struct Tables {
    num_tets: usize,
    flips: Vec<[Bits; 3]>,
    closing: Vec<Bits>,
}

impl Tables {
    fn new(tri: &Triangulation) -> Self {
        let n = tri.num_tets();
        let ne = tri.num_edges();
        let inc = tri.incidence();
        let mut last = vec![0usize; ne];
        let flips = (0..n)
            .map(|t| {
                std::array::from_fn(|k| {
                    let mut b = bits_zero(ne);
                    for (e, l) in last.iter_mut().enumerate() {
                        let i = inc.get(e, 3 * t + k);
                        if i > 0 {
                            *l = (*l).max(t);
                        }
                        if i % 2 == 1 {
                            b[e / 64] |= 1 << (e % 64);
                        }
                    }
                    b
                })
            })
            .collect();
        let mut closing = vec![bits_zero(ne); n];
        for (e, &t) in last.iter().enumerate() {
            closing[t][e / 64] |= 1 << (e % 64);
        }
        Tables {
            num_tets: n,
            flips,
            closing,
        }
    }
}

struct Search<'a> {
    tables: &'a Tables,
    limit: usize,
    stop_at_limit: bool,
    choices: Vec<u8>,
    parity: Bits,
    found: Vec<Z2Assignment>,
    count: u64,
    deepest: Option<DeepestFailure>,
}

impl Search<'_> {
    fn done(&self) -> bool {
        self.stop_at_limit && self.found.len() >= self.limit
    }

    fn visit(&mut self, t: usize) {
        if t == self.tables.num_tets {
            self.count += 1;
            if self.found.len() < self.limit {
                self.found.push(Z2Assignment::from_choices(&self.choices));
            }
            return;
        }
        for k in 0..3u8 {
            if self.done() {
                return;
            }
            xor_into(&mut self.parity, &self.tables.flips[t][k as usize]);
            let odd: Bits = self
                .parity
                .iter()
                .zip(&self.tables.closing[t])
                .map(|(p, c)| p & c)
                .collect();
            if odd.iter().all(|&w| w == 0) {
                self.choices.push(k);
                self.visit(t + 1);
                self.choices.pop();
            } else {
                self.record_failure(t + 1, &odd);
            }
            xor_into(&mut self.parity, &self.tables.flips[t][k as usize]);
        }
    }

    fn record_failure(&mut self, depth: usize, odd: &Bits) {
        let edges: Vec<usize> = odd
            .iter()
            .enumerate()
            .flat_map(|(w, &bits)| (0..64).filter(move |b| bits >> b & 1 == 1).map(move |b| 64 * w + b))
            .collect();
        match &mut self.deepest {
            Some(d) if d.depth > depth => {}
            Some(d) if d.depth == depth => {
                for e in edges {
                    if !d.edges.contains(&e) {
                        d.edges.push(e);
                    }
                }
                d.edges.sort_unstable();
            }
            _ => self.deepest = Some(DeepestFailure { depth, edges }),
        }
    }
}

/// Backtracking enumeration, parallel over the choice in tetrahedron 0.
/// Structures come out in lexicographic order of their chosen quads; the
/// count is exact when `|T| ≤ 20` or when `count_exact` is set.
pub fn enumerate_taut(tri: &Triangulation, limit: usize, count_exact: bool) -> TautEnumeration {
    let tables = Tables::new(tri);
    let complete = count_exact || tri.num_tets() <= EXACT_COUNT_MAX_TETS;
    let ne = tri.num_edges();
    let subtrees: Vec<Search> = (0..3u8)
        .into_par_iter()
        .map(|k| {
            let mut s = Search {
                tables: &tables,
                limit,
                stop_at_limit: !complete,
                choices: Vec::with_capacity(tri.num_tets()),
                parity: bits_zero(ne),
                found: Vec::new(),
                count: 0,
                deepest: None,
            };
            xor_into(&mut s.parity, &tables.flips[0][k as usize]);
            let odd: Bits = s.parity.iter().zip(&tables.closing[0]).map(|(p, c)| p & c).collect();
            if odd.iter().all(|&w| w == 0) {
                s.choices.push(k);
                s.visit(1);
            } else {
                s.record_failure(1, &odd);
            }
            s
        })
        .collect();

    let count: u64 = subtrees.iter().map(|s| s.count).sum();
    let mut deepest: Option<DeepestFailure> = None;
    let mut structures = Vec::new();
    for s in subtrees {
        structures.extend(s.found);
        if let Some(d) = s.deepest {
            deepest = match deepest {
                Some(mut cur) if cur.depth == d.depth => {
                    cur.edges.extend(d.edges);
                    cur.edges.sort_unstable();
                    cur.edges.dedup();
                    Some(cur)
                }
                Some(cur) if cur.depth > d.depth => Some(cur),
                _ => Some(d),
            };
        }
    }
    structures.sort_by_key(Z2Assignment::support);
    structures.truncate(limit);
    TautEnumeration {
        count: complete.then_some(count),
        deepest_failure: if complete && count == 0 { deepest } else { None },
        structures,
    }
}

/// One row of the comparison between the two formulations on `{0,1}³`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuadraticCase {
    pub f: [u8; 3],
    /// `Σ f ≡ 1` and `Σ_{q<q'} f(q) f(q') ≡ 0` over GF(2).
    pub quadratic: bool,
    pub exactly_one: bool,
}

pub fn quadratic_cases() -> Vec<QuadraticCase> {
    (0..8u8)
        .map(|m| {
            let f = [m & 1, (m >> 1) & 1, (m >> 2) & 1];
            let linear = (f[0] + f[1] + f[2]) % 2;
            let pairwise = (f[0] * f[1] + f[0] * f[2] + f[1] * f[2]) % 2;
            QuadraticCase {
                f,
                quadratic: linear == 1 && pairwise == 0,
                exactly_one: f.iter().map(|&x| x as u32).sum::<u32>() == 1,
            }
        })
        .collect()
}

/// Whether the quadratic conditions single out exactly the vectors with
/// one nonzero coordinate.
pub fn verify_quadratic_equiv() -> bool {
    quadratic_cases().iter().all(|c| c.quadratic == c.exactly_one)
}

/// `f = g/π` for angles `g` with values in `{0, π}` (mod 2π is not taken).
pub fn from_taut_angles(tri: &Triangulation, g: &[f64]) -> Result<Z2Assignment> {
    if g.len() != tri.num_quads() {
        return Err(Error::Precondition(format!(
            "expected {} angles, got {}",
            tri.num_quads(),
            g.len()
        )));
    }
    let f = g
        .iter()
        .enumerate()
        .map(|(q, &x)| {
            if x.abs() < 1e-9 {
                Ok(0)
            } else if (x - PI).abs() < 1e-9 {
                Ok(1)
            } else {
                Err(Error::Precondition(format!("angle {x} at quad {q} is neither 0 nor π")))
            }
        })
        .collect::<Result<Vec<u8>>>()?;
    Ok(Z2Assignment { f })
}
