//! Haken's normal surface matching equations, their solution space, and the
//! search for solutions with at most two nonzero quad coordinates.
//!
//! Normal vectors are laid out as `[triangles (4|T|) | quads (3|T|)]`.

use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::angles::tas_basis;
use crate::complex::{quad_type_of_pair, Triangulation};
use crate::error::{Error, Result};
use crate::exact::{dot, is_zero_vec, orthogonal_complement, rank_of, rat, QMatrix, Rational};
use crate::nzform::{build_forms, NzMatrix};

#[derive(Debug, Clone)]
pub struct MatchingSystems {
    /// One row per normal arc class, `6|T|` rows by `7|T|` columns.
    pub standard: QMatrix,
    /// Rows `W(e, ·)`, `|E|` by `3|T|`.
    pub quad: QMatrix,
}

/// Builds the arc-class equations at slot level.
pub fn standard_matrix(tri: &Triangulation) -> QMatrix {
    let n = tri.num_tets();
    let tri_col = |t: usize, v: usize| 4 * t + v;
    let quad_col = |t: usize, k: usize| 4 * n + 3 * t + k;
    let mut m = QMatrix::zeros(6 * n, 7 * n);
    let mut row = 0;
    for fp in tri.faces() {
        for v in (0..4).filter(|&v| v != fp.face) {
            let v2 = fp.perm[v];
            let mut add = |col: usize, c: i64| {
                let x = m.get(row, col) + rat(c);
                m.set(row, col, x);
            };
            add(tri_col(fp.tet, v), 1);
            add(quad_col(fp.tet, quad_type_of_pair(fp.face, v)), 1);
            add(tri_col(fp.to_tet, v2), -1);
            add(quad_col(fp.to_tet, quad_type_of_pair(fp.to_face, v2)), -1);
            row += 1;
        }
    }
    m
}

pub fn matching_systems(tri: &Triangulation, nz: &NzMatrix) -> MatchingSystems {
    MatchingSystems {
        standard: standard_matrix(tri),
        quad: QMatrix::from_i64_rows(&nz.big_w, tri.num_quads()),
    }
}

/// Quad part of a normal vector.
pub fn project_quads(tri: &Triangulation, y: &[Rational]) -> Vec<Rational> {
    y[tri.num_triangles()..].to_vec()
}

/// The normal vector with every triangle coordinate 1 and quads 0.
pub fn vertex_linking_vector(tri: &Triangulation) -> Vec<Rational> {
    let mut y = vec![rat(0); 7 * tri.num_tets()];
    for x in y.iter_mut().take(tri.num_triangles()) {
        *x = rat(1);
    }
    y
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    pub dim_solutions: usize,
    pub dim_projection: usize,
    pub dim_tas: usize,
    pub dim_tas_perp: usize,
    /// Rank of the projection and the complement taken together.
    pub rank_union: usize,
    pub orthogonal: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionBases {
    #[serde(serialize_with = "crate::exact::serde_rational::vec_vec")]
    pub sns_basis: Vec<Vec<Rational>>,
    #[serde(serialize_with = "crate::exact::serde_rational::vec_vec")]
    pub tas_basis: Vec<Vec<Rational>>,
    #[serde(serialize_with = "crate::exact::serde_rational::vec_vec")]
    pub tas_perp_basis: Vec<Vec<Rational>>,
    pub duality: DualityReport,
}

/// Exact bases of the normal solution space and of the orthogonal
/// complement of the tangential angle structures, with the check that the
/// quad projection of the former is the latter.
pub fn solution_bases(tri: &Triangulation) -> Result<SolutionBases> {
    let nq = tri.num_quads();
    let sns_basis = standard_matrix(tri).kernel();
    let tas = tas_basis(tri).basis;
    let tas_perp_basis = orthogonal_complement(&tas, nq);
    let proj: Vec<Vec<Rational>> = sns_basis.iter().map(|y| project_quads(tri, y)).collect();

    let dim_projection = rank_of(&proj, nq);
    let mut both = proj.clone();
    both.extend(tas_perp_basis.iter().cloned());
    let rank_union = rank_of(&both, nq);
    let orthogonal = proj
        .iter()
        .all(|p| tas.iter().all(|t| dot(p, t).is_zero()));
    let duality = DualityReport {
        dim_solutions: sns_basis.len(),
        dim_projection,
        dim_tas: tas.len(),
        dim_tas_perp: tas_perp_basis.len(),
        rank_union,
        orthogonal,
        holds: orthogonal
            && dim_projection == tas_perp_basis.len()
            && rank_union == dim_projection
            && dim_projection + tas.len() == nq,
    };
    if !duality.holds {
        return Err(Error::DualityViolation(format!("{duality:?}")));
    }
    Ok(SolutionBases {
        sns_basis,
        tas_basis: tas,
        tas_perp_basis,
        duality,
    })
}

/// Whether the edge vectors `u_e` all lie in TAS, and whether they span it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EdgeVectorSpan {
    pub all_tangential: bool,
    pub rank: usize,
    pub dim_tas: usize,
    pub spans_tas: bool,
}

pub fn edge_vector_span(tri: &Triangulation) -> EdgeVectorSpan {
    let nz = build_forms(tri);
    let tas = tas_basis(tri);
    let u: Vec<Vec<Rational>> = (0..tri.num_edges()).map(|e| nz.edge_vector(e)).collect();
    let all_tangential = u.iter().all(|v| crate::angles::is_tangential(tri, v));
    let rank = rank_of(&u, tri.num_quads());
    EdgeVectorSpan {
        all_tangential,
        rank,
        dim_tas: tas.dim,
        spans_tas: all_tangential && rank == tas.dim,
    }
}

/// A solution of the matching equations with one or two nonzero quads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwoQuadSolution {
    pub target: usize,
    pub partner: Option<usize>,
    #[serde(serialize_with = "crate::exact::serde_rational::vec")]
    pub quad_vector: Vec<Rational>,
    #[serde(serialize_with = "crate::exact::serde_rational::vec")]
    pub vector: Vec<Rational>,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Cluster {
    pub tet: usize,
    /// First solution found for each of the tetrahedron's quads.
    pub members: Vec<TwoQuadSolution>,
    /// How many solutions each of the three searches returned.
    pub candidate_counts: [usize; 3],
    /// Number of distinct vectors among the members.
    pub distinct: usize,
}

/// Precomputed data for lifting and searching.
#[derive(Debug, Clone)]
pub struct Haken {
    num_tets: usize,
    standard: QMatrix,
    triangle_part: QMatrix,
    tas: Vec<Vec<Rational>>,
}

impl Haken {
    pub fn new(tri: &Triangulation) -> Self {
        let n = tri.num_tets();
        let standard = standard_matrix(tri);
        let mut triangle_part = QMatrix::zeros(6 * n, 4 * n);
        for i in 0..6 * n {
            for j in 0..4 * n {
                triangle_part.set(i, j, standard.get(i, j).clone());
            }
        }
        Haken {
            num_tets: n,
            standard,
            triangle_part,
            tas: tas_basis(tri).basis,
        }
    }

    pub fn num_quads(&self) -> usize {
        3 * self.num_tets
    }

    pub fn standard(&self) -> &QMatrix {
        &self.standard
    }

    pub fn tas(&self) -> &[Vec<Rational>] {
        &self.tas
    }

    /// Residual of the matching equations at `y`.
    pub fn residual(&self, y: &[Rational]) -> Vec<Rational> {
        self.standard.mul_vec(y)
    }

    pub fn is_solution(&self, y: &[Rational]) -> bool {
        is_zero_vec(&self.residual(y))
    }

    /// Index of a TAS basis vector not orthogonal to `v`, if any.
    pub fn tas_perp_witness(&self, v: &[Rational]) -> Option<usize> {
        self.tas.iter().position(|t| !dot(t, v).is_zero())
    }

    /// A normal vector with quad part `v`, triangle free variables zero.
    pub fn lift(&self, v: &[Rational]) -> Result<Vec<Rational>> {
        assert_eq!(v.len(), self.num_quads());
        if let Some(witness) = self.tas_perp_witness(v) {
            return Err(Error::NotInTasPerp { witness });
        }
        let n = self.num_tets;
        let rhs: Vec<Rational> = (0..6 * n)
            .map(|i| {
                -(0..3 * n)
                    .filter(|&q| !v[q].is_zero())
                    .map(|q| self.standard.get(i, 4 * n + q) * &v[q])
                    .sum::<Rational>()
            })
            .collect();
        let tri_part = self.triangle_part.solve(&rhs).ok_or_else(|| {
            Error::DualityViolation("quad vector orthogonal to TAS does not lift".into())
        })?;
        let mut y = tri_part;
        y.extend(v.iter().cloned());
        Ok(y)
    }

    /// TAS basis coordinates at quad `q`.
    fn column(&self, q: usize) -> Vec<Rational> {
        self.tas.iter().map(|t| t[q].clone()).collect()
    }

    /// All vectors in the orthogonal complement of TAS supported on
    /// `{target, q1}` with nonzero target coordinate, one per partner,
    /// lifted to full normal vectors.
    pub fn two_quad_search(&self, target: usize) -> Vec<TwoQuadSolution> {
        let nq = self.num_quads();
        let ct = self.column(target);
        let mut out = Vec::new();
        if is_zero_vec(&ct) {
            let mut v = vec![rat(0); nq];
            v[target] = rat(1);
            out.push(self.solution(target, None, v));
            return out;
        }
        for q1 in (0..nq).filter(|&q| q != target) {
            let c1 = self.column(q1);
            // need ct = λ c1 with λ ≠ 0; then target* − λ q1* is orthogonal to TAS
            let Some(k) = c1.iter().position(|x| !x.is_zero()) else {
                continue;
            };
            let lambda = &ct[k] / &c1[k];
            if ct.iter().zip(&c1).all(|(a, b)| *a == &lambda * b) {
                let mut v = vec![rat(0); nq];
                v[target] = rat(1);
                v[q1] = -lambda;
                out.push(self.solution(target, Some(q1), v));
            }
        }
        out
    }

    fn solution(&self, target: usize, partner: Option<usize>, v: Vec<Rational>) -> TwoQuadSolution {
        let vector = self
            .lift(&v)
            .expect("vector orthogonal to TAS lifts to a normal solution");
        let support = (0..v.len()).filter(|&q| !v[q].is_zero()).collect();
        TwoQuadSolution {
            target,
            partner,
            quad_vector: v,
            vector,
            support,
        }
    }

    /// Tetrahedra whose three quads all admit a two-quad solution.
    pub fn cluster_search(&self) -> Vec<Cluster> {
        let per_quad: Vec<Vec<TwoQuadSolution>> = (0..self.num_quads())
            .into_par_iter()
            .map(|q| self.two_quad_search(q))
            .collect();
        (0..self.num_tets)
            .filter_map(|t| {
                let lists = [&per_quad[3 * t], &per_quad[3 * t + 1], &per_quad[3 * t + 2]];
                if lists.iter().any(|l| l.is_empty()) {
                    return None;
                }
                let members: Vec<TwoQuadSolution> = lists.iter().map(|l| l[0].clone()).collect();
                let mut distinct: Vec<&Vec<Rational>> = Vec::new();
                for m in &members {
                    if !distinct.iter().any(|d| same_ray(d, &m.quad_vector)) {
                        distinct.push(&m.quad_vector);
                    }
                }
                Some(Cluster {
                    tet: t,
                    candidate_counts: [lists[0].len(), lists[1].len(), lists[2].len()],
                    distinct: distinct.len(),
                    members,
                })
            })
            .collect()
    }
}

fn same_ray(a: &[Rational], b: &[Rational]) -> bool {
    rank_of(&[a.to_vec(), b.to_vec()], a.len()) <= 1
}
