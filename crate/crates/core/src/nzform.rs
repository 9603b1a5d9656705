//! The Neumann–Zagier form on quads and the chain maps `A`, `A*`, `B`, `B*`.
//!
//! Everything here is exact: integer matrices for the forms, rationals for
//! ranks and kernels.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::Serialize;

use crate::complex::Triangulation;
use crate::error::{Error, Result};
use crate::exact::{primitive, rank_of, rat, rat_frac, QMatrix, Rational};

/// The form `w` on quads and its edge contraction `W`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NzMatrix {
    /// `w[q][q2]`: 1 if `q -> q2`, -1 if `q2 -> q`, else 0.
    pub w: Vec<Vec<i64>>,
    /// `big_w[e][q] = sum_q2 i(e, q2) w(q2, q)`.
    pub big_w: Vec<Vec<i64>>,
}

impl NzMatrix {
    pub fn num_quads(&self) -> usize {
        self.w.len()
    }

    /// `w(x, y) = sum w(q, q2) x(q) y(q2)`.
    pub fn pairing(&self, x: &[Rational], y: &[Rational]) -> Rational {
        let mut s = Rational::zero();
        for (q, row) in self.w.iter().enumerate() {
            if x[q].is_zero() {
                continue;
            }
            for (q2, &c) in row.iter().enumerate() {
                if c != 0 {
                    s += &x[q] * &y[q2] * rat(c);
                }
            }
        }
        s
    }

    /// `u_e = sum_q W(e, q) q*`, as a rational vector.
    pub fn edge_vector(&self, e: usize) -> Vec<Rational> {
        self.big_w[e].iter().map(|&x| rat(x)).collect()
    }
}

pub fn build_forms(tri: &Triangulation) -> NzMatrix {
    let nq = tri.num_quads();
    let mut w = vec![vec![0i64; nq]; nq];
    for (q, row) in w.iter_mut().enumerate() {
        row[tri.quad_successor(q)] = 1;
        row[tri.quad_predecessor(q)] = -1;
    }
    let inc = tri.incidence();
    let big_w = (0..tri.num_edges())
        .map(|e| {
            (0..nq)
                .map(|q| {
                    (0..nq)
                        .map(|q2| inc.get(e, q2) as i64 * w[q2][q])
                        .sum()
                })
                .collect()
        })
        .collect();
    NzMatrix { w, big_w }
}

/// Integer incidence matrix `i(e, q)`, edges by quads.
pub fn incidence_matrix(tri: &Triangulation) -> Vec<Vec<i64>> {
    tri.incidence()
        .class
        .iter()
        .map(|row| row.iter().map(|&x| x as i64).collect())
        .collect()
}

/// Tetrahedron-sum constraints, one row per tetrahedron.
pub fn tet_matrix(tri: &Triangulation) -> Vec<Vec<i64>> {
    let nq = tri.num_quads();
    (0..tri.num_tets())
        .map(|t| (0..nq).map(|q| i64::from(q / 3 == t)).collect())
        .collect()
}

/// `B(v, e)`: number of ends of edge `e` at vertex `v`.
pub fn vertex_edge_matrix(tri: &Triangulation) -> Vec<Vec<i64>> {
    let mut b = vec![vec![0i64; tri.num_edges()]; tri.num_vertices()];
    for (e, (a, c)) in tri.edge_endpoints().into_iter().enumerate() {
        b[a][e] += 1;
        b[c][e] += 1;
    }
    b
}

/// Basis of `Z = {x : sum over each tetrahedron is zero}`.
pub fn z_basis(tri: &Triangulation) -> Vec<Vec<Rational>> {
    QMatrix::from_i64_rows(&tet_matrix(tri), tri.num_quads()).kernel()
}

fn matmul_i64(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

fn transpose_i64(a: &[Vec<i64>], cols: usize) -> Vec<Vec<i64>> {
    (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Outcome of one named identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentityStatus {
    pub status: &'static str,
    /// Index tuples witnessing a failure; empty when the identity holds.
    pub violations: Vec<Vec<usize>>,
}

/// Named identity checks, ordered by name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct IdentityReport {
    pub identities: BTreeMap<String, IdentityStatus>,
}

impl IdentityReport {
    fn record(&mut self, name: &str, violations: Vec<Vec<usize>>) {
        let status = if violations.is_empty() { "pass" } else { "fail" };
        self.identities
            .insert(name.to_string(), IdentityStatus { status, violations });
    }

    pub fn all_pass(&self) -> bool {
        self.identities.values().all(|s| s.violations.is_empty())
    }

    pub fn merge(&mut self, other: IdentityReport) {
        self.identities.extend(other.identities);
    }

    /// Turns the first failing identity into an error.
    pub fn into_result(self) -> Result<IdentityReport> {
        if let Some((name, st)) = self
            .identities
            .iter()
            .find(|(_, s)| !s.violations.is_empty())
        {
            return Err(Error::IdentityViolation {
                identity: name.clone(),
                indices: st.violations[0].clone(),
            });
        }
        Ok(self)
    }
}

/// Checks the integer identities satisfied by `w` on this triangulation.
pub fn pairing_identities(tri: &Triangulation, nz: &NzMatrix) -> IdentityReport {
    let nq = tri.num_quads();
    let w = &nz.w;
    let inc = incidence_matrix(tri);
    let mut report = IdentityReport::default();

    let mut bad = Vec::new();
    for q in 0..nq {
        for q2 in 0..nq {
            if w[q][q2] + w[q2][q] != 0 || (w[q][q2] != 0 && (q / 3 != q2 / 3 || q == q2)) {
                bad.push(vec![q, q2]);
            }
        }
    }
    report.record("antisymmetric_within_tets", bad);

    let bad = (0..nq)
        .filter(|&q2| (0..nq).map(|q| w[q][q2]).sum::<i64>() != 0)
        .map(|q2| vec![q2])
        .collect();
    report.record("column_sums_vanish", bad);

    // sum_{q,q2} i(e,q) i(e2,q2) w(q,q2) = (I w I^T)(e, e2)
    let iw = matmul_i64(&inc, w);
    let iwit = matmul_i64(&iw, &transpose_i64(&inc, nq));
    let mut bad = Vec::new();
    for (e, row) in iwit.iter().enumerate() {
        for (e2, &x) in row.iter().enumerate() {
            if x != 0 {
                bad.push(vec![e, e2]);
            }
        }
    }
    report.record("edge_pairing_vanishes", bad);

    let w2 = matmul_i64(w, w);
    let mut bad = Vec::new();
    for q1 in 0..nq {
        for q2 in 0..nq {
            let expected = if q1 == q2 {
                -2
            } else if q1 / 3 == q2 / 3 {
                1
            } else {
                0
            };
            if w2[q1][q2] != expected {
                bad.push(vec![q1, q2]);
            }
        }
    }
    report.record("square_composition", bad);

    let mut bad = Vec::new();
    for (k, y) in z_basis(tri).iter().enumerate() {
        for q1 in 0..nq {
            let lhs: Rational = (0..nq)
                .filter(|&q2| w2[q1][q2] != 0)
                .map(|q2| rat(w2[q1][q2]) * &y[q2])
                .sum();
            if lhs != rat(-3) * &y[q1] {
                bad.push(vec![k, q1]);
            }
        }
    }
    report.record("square_on_z_is_minus_three", bad);

    let w3 = matmul_i64(&w2, w);
    let mut bad = Vec::new();
    for q1 in 0..nq {
        for q4 in 0..nq {
            if w3[q1][q4] != -3 * w[q1][q4] {
                bad.push(vec![q1, q4]);
            }
        }
    }
    report.record("cube_is_minus_three_w", bad);
    report
}

/// Ranks and kernels of the chain maps, with the exactness checks.
#[derive(Debug, Clone, Serialize)]
pub struct ExactnessReport {
    pub dim_z: usize,
    pub rank_a: usize,
    pub rank_b: usize,
    pub rank_b_star: usize,
    pub rank_a_star: usize,
    pub dim_ker_a_star: usize,
    pub dim_tas: usize,
    #[serde(serialize_with = "crate::exact::serde_rational::vec_vec")]
    pub tas_basis: Vec<Vec<Rational>>,
    pub checks: IdentityReport,
}

/// The chain maps as explicit matrices.
#[derive(Debug, Clone)]
pub struct ChainMaps {
    /// Rows are basis vectors of `Z` in quad coordinates.
    pub z_basis: Vec<Vec<Rational>>,
    /// `A` on quad coordinates: `i(e, q)`, edges by quads.
    pub a: QMatrix,
    /// `B`: vertices by edges.
    pub b: QMatrix,
    /// `A*`: quads by edges, `W(e, q) / 3` transposed.
    pub a_star: QMatrix,
    /// `B*`: edges by vertices.
    pub b_star: QMatrix,
}

pub fn chain_maps(tri: &Triangulation, nz: &NzMatrix) -> ChainMaps {
    let nq = tri.num_quads();
    let ne = tri.num_edges();
    let a = QMatrix::from_i64_rows(&incidence_matrix(tri), nq);
    let b = QMatrix::from_i64_rows(&vertex_edge_matrix(tri), ne);
    let a_star = QMatrix::from_i64_rows(&transpose_i64(&nz.big_w, nq), ne).scale(&rat_frac(1, 3));
    let b_star = b.transpose();
    ChainMaps {
        z_basis: z_basis(tri),
        a,
        b,
        a_star,
        b_star,
    }
}

/// Kernel of `A` restricted to `Z`, i.e. the tangential angle structures,
/// computed through a basis of `Z`.
pub fn kernel_of_a(tri: &Triangulation, maps: &ChainMaps) -> Vec<Vec<Rational>> {
    let nq = tri.num_quads();
    let zb = &maps.z_basis;
    if zb.is_empty() {
        return Vec::new();
    }
    // columns: images of the Z basis vectors
    let az = maps.a.mul(&QMatrix::from_rows(zb.clone(), nq).transpose());
    az.kernel()
        .into_iter()
        .map(|c| {
            let v: Vec<Rational> = (0..nq)
                .map(|q| c.iter().zip(zb).map(|(ci, z)| ci * &z[q]).sum())
                .collect();
            primitive(&v)
        })
        .collect()
}

/// Verifies the exactness statements and isotropy of `A*`.
pub fn chain_analysis(tri: &Triangulation, nz: &NzMatrix) -> ExactnessReport {
    let nq = tri.num_quads();
    let ne = tri.num_edges();
    let nv = tri.num_vertices();
    let maps = chain_maps(tri, nz);
    let mut checks = IdentityReport::default();

    let dim_z = maps.z_basis.len();
    let a_on_z: Vec<Vec<Rational>> = maps.z_basis.iter().map(|z| maps.a.mul_vec(z)).collect();
    let rank_a = rank_of(&a_on_z, ne);
    let rank_b = maps.b.rank();
    let rank_b_star = maps.b_star.rank();
    let rank_a_star = maps.a_star.rank();
    let dim_ker_a_star = ne - rank_a_star;

    let mut bad = Vec::new();
    for (k, az) in a_on_z.iter().enumerate() {
        for (v, x) in maps.b.mul_vec(az).iter().enumerate() {
            if !x.is_zero() {
                bad.push(vec![k, v]);
            }
        }
    }
    checks.record("b_after_a_vanishes", bad);

    let bad = if rank_a == ne - rank_b { vec![] } else { vec![vec![rank_a, ne - rank_b]] };
    checks.record("image_a_is_kernel_b", bad);

    let bad = if rank_b == nv { vec![] } else { vec![vec![rank_b, nv]] };
    checks.record("b_surjective", bad);

    let bad = if rank_b_star == nv { vec![] } else { vec![vec![rank_b_star, nv]] };
    checks.record("b_star_injective", bad);

    let comp = maps.a_star.mul(&maps.b_star);
    let mut bad = Vec::new();
    for q in 0..nq {
        for v in 0..nv {
            if !comp.get(q, v).is_zero() {
                bad.push(vec![q, v]);
            }
        }
    }
    if dim_ker_a_star != rank_b_star {
        bad.push(vec![dim_ker_a_star, rank_b_star]);
    }
    checks.record("kernel_a_star_is_image_b_star", bad);

    // A* lands in Z
    let mut bad = Vec::new();
    for e in 0..ne {
        for t in 0..tri.num_tets() {
            let s: i64 = (0..3).map(|k| nz.big_w[e][3 * t + k]).sum();
            if s != 0 {
                bad.push(vec![e, t]);
            }
        }
    }
    checks.record("a_star_lands_in_z", bad);

    // (A(y), x) = w(y, A*(x)) for y in the Z basis and x a standard basis vector
    let a_star_cols: Vec<Vec<Rational>> = (0..ne)
        .map(|e| (0..nq).map(|q| maps.a_star.get(q, e).clone()).collect())
        .collect();
    let mut bad = Vec::new();
    for (k, y) in maps.z_basis.iter().enumerate() {
        for (e, col) in a_star_cols.iter().enumerate() {
            if a_on_z[k][e] != nz.pairing(y, col) {
                bad.push(vec![k, e]);
            }
        }
    }
    checks.record("a_star_is_adjoint", bad);

    let mut bad = Vec::new();
    for (e1, x) in a_star_cols.iter().enumerate() {
        for (e2, y) in a_star_cols.iter().enumerate() {
            if !nz.pairing(x, y).is_zero() {
                bad.push(vec![e1, e2]);
            }
        }
    }
    checks.record("a_star_image_isotropic", bad);

    let tas_basis = kernel_of_a(tri, &maps);
    let dim_tas = tas_basis.len();
    let bad = if rank_a + dim_tas == dim_z { vec![] } else { vec![vec![rank_a, dim_tas, dim_z]] };
    checks.record("rank_nullity_on_z", bad);

    ExactnessReport {
        dim_z,
        rank_a,
        rank_b,
        rank_b_star,
        rank_a_star,
        dim_ker_a_star,
        dim_tas,
        tas_basis,
        checks,
    }
}

/// Every identity of this module on one triangulation.
pub fn selftest(tri: &Triangulation) -> IdentityReport {
    let nz = build_forms(tri);
    let mut report = pairing_identities(tri, &nz);
    report.merge(chain_analysis(tri, &nz).checks);
    report
}

/// `w(x, y)` over plain integer coordinates, used where vectors are small.
pub fn pairing_i64(nz: &NzMatrix, x: &[i64], y: &[i64]) -> i64 {
    let xs: Vec<Rational> = x.iter().map(|&v| rat(v)).collect();
    let ys: Vec<Rational> = y.iter().map(|&v| rat(v)).collect();
    let r = nz.pairing(&xs, &ys);
    debug_assert!(r.is_integer());
    r.to_integer().try_into().expect("small pairing")
}
