//! Closed oriented triangulated pseudo 3-manifolds.
//!
//! A triangulation is a set of tetrahedra with their faces glued in pairs.
//! Each tetrahedron has vertices `0..4`; face `f` is the face opposite
//! vertex `f`. A gluing `(tet, face) -> (to_tet, to_face, perm)` maps
//! vertex `v` of `tet` to vertex `perm[v]` of `to_tet`.
//!
//! Slot numbering (all lexicographic in `(tet, local index)`):
//!
//! * vertex slot `4 * tet + v`
//! * edge slot `6 * tet + i`, with local edges ordered
//!   `01, 02, 03, 12, 13, 23`
//! * quad `3 * tet + k`, where type `k = 0` is disjoint from edges `01`,`23`,
//!   `k = 1` from `02`,`13` and `k = 2` from `03`,`12`
//! * normal triangle `4 * tet + v`, the triangle cutting off vertex `v`

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local edges of a tetrahedron as vertex pairs.
pub const EDGE_VERTICES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Quad type disjoint from each local edge.
pub const EDGE_QUAD_TYPE: [usize; 6] = [0, 1, 2, 2, 1, 0];

/// The two local edges disjoint from each quad type.
pub const QUAD_EDGES: [[usize; 2]; 3] = [[0, 5], [1, 4], [2, 3]];

pub const TRIANGLES_PER_TET: usize = 4;
pub const QUADS_PER_TET: usize = 3;

pub fn edge_index(a: usize, b: usize) -> usize {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    EDGE_VERTICES
        .iter()
        .position(|&e| e == (a, b))
        .expect("not an edge of a tetrahedron")
}

/// Quad type separating the vertex pair `{a, b}` from the other two vertices.
pub fn quad_type_of_pair(a: usize, b: usize) -> usize {
    EDGE_QUAD_TYPE[edge_index(a, b)]
}

/// A permutation of the four vertices of a tetrahedron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Perm4(pub [usize; 4]);

impl Perm4 {
    pub fn new(p: [usize; 4]) -> Option<Self> {
        let mut seen = [false; 4];
        for &x in &p {
            if x >= 4 || seen[x] {
                return None;
            }
            seen[x] = true;
        }
        Some(Perm4(p))
    }

    pub fn apply(&self, v: usize) -> usize {
        self.0[v]
    }

    pub fn inverse(&self) -> Perm4 {
        let mut inv = [0; 4];
        for (i, &x) in self.0.iter().enumerate() {
            inv[x] = i;
        }
        Perm4(inv)
    }

    /// +1 for even permutations, -1 for odd ones.
    pub fn sign(&self) -> i8 {
        let mut s = 1;
        for i in 0..4 {
            for j in (i + 1)..4 {
                if self.0[i] > self.0[j] {
                    s = -s;
                }
            }
        }
        s
    }
}

/// One face pairing as it appears in the triangulation file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gluing {
    pub tet: usize,
    pub face: usize,
    pub to_tet: usize,
    pub to_face: usize,
    pub perm: Vec<usize>,
}

/// The raw face-pairing data of a triangulation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GluingSpec {
    pub tets: usize,
    pub gluings: Vec<Gluing>,
}

impl GluingSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialises")
    }

    /// A random connected orientable gluing of `tets` tetrahedra, listing
    /// every pairing once. All tetrahedra are positively oriented, so every
    /// permutation is odd.
    pub fn random_orientable<R: Rng>(rng: &mut R, tets: usize) -> Self {
        assert!(tets > 0);
        loop {
            let mut faces: Vec<(usize, usize)> = (0..tets)
                .flat_map(|t| (0..4).map(move |f| (t, f)))
                .collect();
            faces.shuffle(rng);
            let gluings: Vec<Gluing> = faces
                .chunks(2)
                .map(|pair| {
                    let (t, f) = pair[0];
                    let (t2, f2) = pair[1];
                    Gluing {
                        tet: t,
                        face: f,
                        to_tet: t2,
                        to_face: f2,
                        perm: random_odd_perm(rng, f, f2).0.to_vec(),
                    }
                })
                .collect();
            let spec = GluingSpec { tets, gluings };
            if spec.is_connected() {
                return spec;
            }
        }
    }

    fn is_connected(&self) -> bool {
        let mut uf = UnionFind::new(self.tets);
        for g in &self.gluings {
            if g.tet < self.tets && g.to_tet < self.tets {
                uf.union(g.tet, g.to_tet);
            }
        }
        (0..self.tets).all(|t| uf.find(t) == uf.find(0))
    }
}

fn random_odd_perm<R: Rng>(rng: &mut R, from: usize, to: usize) -> Perm4 {
    let mut rest_src: Vec<usize> = (0..4).filter(|&v| v != from).collect();
    let mut rest_dst: Vec<usize> = (0..4).filter(|&v| v != to).collect();
    rest_dst.shuffle(rng);
    let mut p = [0; 4];
    p[from] = to;
    for (s, d) in rest_src.iter().zip(&rest_dst) {
        p[*s] = *d;
    }
    let mut perm = Perm4(p);
    if perm.sign() > 0 {
        // swapping two images flips the parity while keeping p[from] = to
        rest_src.sort();
        let (a, b) = (rest_src[0], rest_src[1]);
        perm.0.swap(a, b);
    }
    perm
}

/// Union–find whose representative is always the smallest member.
#[derive(Debug, Clone)]
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    /// Class id per element, classes numbered by their least member.
    fn classes(&mut self) -> (Vec<usize>, usize) {
        let n = self.parent.len();
        let mut id = vec![usize::MAX; n];
        let mut out = vec![0; n];
        let mut count = 0;
        for x in 0..n {
            let r = self.find(x);
            if id[r] == usize::MAX {
                id[r] = count;
                count += 1;
            }
            out[x] = id[r];
        }
        (out, count)
    }
}

/// A quotient face: the pair of tetrahedron faces that were identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FacePair {
    pub tet: usize,
    pub face: usize,
    pub to_tet: usize,
    pub to_face: usize,
    pub perm: [usize; 4],
}

/// Incidence between edges and normal quadrilaterals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IncidenceTable {
    /// `class[e][q]` = number of slots of edge class `e` disjoint from quad `q`.
    pub class: Vec<Vec<u8>>,
    /// For each edge slot, the quad of its tetrahedron disjoint from it.
    pub slot_quad: Vec<usize>,
}

impl IncidenceTable {
    pub fn get(&self, edge: usize, quad: usize) -> u8 {
        self.class[edge][quad]
    }

    /// Slot-level index: 1 when the slot and quad share a tetrahedron and are disjoint.
    pub fn slot(&self, slot: usize, quad: usize) -> u8 {
        u8::from(self.slot_quad[slot] == quad)
    }

    pub fn num_edges(&self) -> usize {
        self.class.len()
    }
}

/// Per-tetrahedron normal disk bookkeeping returned with the incidence table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TetDisks {
    pub tet: usize,
    /// Edge-slot pairs disjoint from quad types 0, 1, 2.
    pub opposite_edge_pairs: [[usize; 2]; 3],
    pub triangle_types: usize,
    pub quad_types: usize,
}

/// A validated, oriented triangulation with all derived classes.
///
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct Triangulation {
    spec: GluingSpec,
    partner: Vec<FacePair>,
    orientation: Vec<i8>,
    vertex_class: Vec<usize>,
    num_vertices: usize,
    edge_class: Vec<usize>,
    num_edges: usize,
    faces: Vec<FacePair>,
    incidence: IncidenceTable,
}

impl Triangulation {
    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(GluingSpec::from_json(text)?)
    }

    /// Validates the gluing data and builds every derived table.
    pub fn new(spec: GluingSpec) -> Result<Self> {
        let n = spec.tets;
        if n == 0 {
            return Err(Error::NoTetrahedra);
        }
        let mut partner: Vec<Option<FacePair>> = vec![None; 4 * n];
        let mut record = |fp: FacePair| -> Result<()> {
            let slot = &mut partner[4 * fp.tet + fp.face];
            match slot {
                Some(existing) if *existing != fp => Err(Error::ConflictingGluing {
                    tet: fp.tet,
                    face: fp.face,
                }),
                _ => {
                    *slot = Some(fp);
                    Ok(())
                }
            }
        };
        for g in &spec.gluings {
            for &t in &[g.tet, g.to_tet] {
                if t >= n {
                    return Err(Error::TetOutOfRange { tet: t, count: n });
                }
            }
            if g.face >= 4 {
                return Err(Error::FaceOutOfRange { tet: g.tet, face: g.face });
            }
            if g.to_face >= 4 {
                return Err(Error::FaceOutOfRange { tet: g.to_tet, face: g.to_face });
            }
            let bad = |reason| Error::BadPermutation {
                tet: g.tet,
                face: g.face,
                perm: g.perm.clone(),
                reason,
            };
            if g.perm.len() != 4 {
                return Err(bad("expected four entries"));
            }
            let perm = Perm4::new([g.perm[0], g.perm[1], g.perm[2], g.perm[3]])
                .ok_or_else(|| bad("not a permutation of 0..4"))?;
            if perm.apply(g.face) != g.to_face {
                return Err(bad("perm[face] must equal to_face"));
            }
            if g.tet == g.to_tet && g.face == g.to_face {
                return Err(Error::SelfFaceGluing { tet: g.tet, face: g.face });
            }
            let inv = perm.inverse();
            record(FacePair {
                tet: g.tet,
                face: g.face,
                to_tet: g.to_tet,
                to_face: g.to_face,
                perm: perm.0,
            })?;
            record(FacePair {
                tet: g.to_tet,
                face: g.to_face,
                to_tet: g.tet,
                to_face: g.face,
                perm: inv.0,
            })?;
        }
        let partner: Vec<FacePair> = partner
            .into_iter()
            .enumerate()
            .map(|(i, p)| p.ok_or(Error::UngluedFace { tet: i / 4, face: i % 4 }))
            .collect::<Result<_>>()?;

        let orientation = orient(n, &partner)?;

        let mut vuf = UnionFind::new(4 * n);
        let mut euf = UnionFind::new(6 * n);
        for fp in &partner {
            let perm = Perm4(fp.perm);
            for v in (0..4).filter(|&v| v != fp.face) {
                vuf.union(4 * fp.tet + v, 4 * fp.to_tet + perm.apply(v));
            }
            for (i, &(a, b)) in EDGE_VERTICES.iter().enumerate() {
                if a == fp.face || b == fp.face {
                    continue;
                }
                let j = edge_index(perm.apply(a), perm.apply(b));
                euf.union(6 * fp.tet + i, 6 * fp.to_tet + j);
            }
        }
        let (vertex_class, num_vertices) = vuf.classes();
        let (edge_class, num_edges) = euf.classes();

        let faces: Vec<FacePair> = partner
            .iter()
            .filter(|fp| (fp.tet, fp.face) < (fp.to_tet, fp.to_face))
            .copied()
            .collect();
        debug_assert_eq!(faces.len(), 2 * n);

        let mut tri = Triangulation {
            spec,
            partner,
            orientation,
            vertex_class,
            num_vertices,
            edge_class,
            num_edges,
            faces,
            incidence: IncidenceTable {
                class: Vec::new(),
                slot_quad: Vec::new(),
            },
        };
        tri.incidence = build_incidence(&tri);
        Ok(tri)
    }

    pub fn spec(&self) -> &GluingSpec {
        &self.spec
    }

    pub fn num_tets(&self) -> usize {
        self.spec.tets
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_quads(&self) -> usize {
        QUADS_PER_TET * self.num_tets()
    }

    pub fn num_triangles(&self) -> usize {
        TRIANGLES_PER_TET * self.num_tets()
    }

    /// V - E + F - T.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices as i64 - self.num_edges as i64 + self.num_faces() as i64
            - self.num_tets() as i64
    }

    pub fn orientation(&self, tet: usize) -> i8 {
        self.orientation[tet]
    }

    pub fn orientations(&self) -> &[i8] {
        &self.orientation
    }

    pub fn vertex_class(&self, tet: usize, v: usize) -> usize {
        self.vertex_class[4 * tet + v]
    }

    pub fn edge_class(&self, tet: usize, local_edge: usize) -> usize {
        self.edge_class[6 * tet + local_edge]
    }

    pub fn edge_classes(&self) -> &[usize] {
        &self.edge_class
    }

    pub fn vertex_classes(&self) -> &[usize] {
        &self.vertex_class
    }

    pub fn faces(&self) -> &[FacePair] {
        &self.faces
    }

    /// The gluing leaving face `face` of `tet`.
    pub fn partner(&self, tet: usize, face: usize) -> &FacePair {
        &self.partner[4 * tet + face]
    }

    pub fn incidence(&self) -> &IncidenceTable {
        &self.incidence
    }

    /// Number of edge slots in each edge class.
    pub fn edge_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.num_edges];
        for &c in &self.edge_class {
            d[c] += 1;
        }
        d
    }

    /// Vertex classes at the two ends of each edge class.
    pub fn edge_endpoints(&self) -> Vec<(usize, usize)> {
        let mut ends = vec![None; self.num_edges];
        for t in 0..self.num_tets() {
            for (i, &(a, b)) in EDGE_VERTICES.iter().enumerate() {
                let e = self.edge_class(t, i);
                if ends[e].is_none() {
                    ends[e] = Some((self.vertex_class(t, a), self.vertex_class(t, b)));
                }
            }
        }
        ends.into_iter().map(|x| x.expect("every class has a slot")).collect()
    }

    /// Euler characteristic of each vertex link.
    pub fn vertex_link_euler(&self) -> Vec<i64> {
        let v = self.num_vertices;
        let mut corners = vec![0i64; v];
        for &c in &self.vertex_class {
            corners[c] += 1;
        }
        let mut link_vertices = vec![0i64; v];
        for (a, b) in self.edge_endpoints() {
            link_vertices[a] += 1;
            link_vertices[b] += 1;
        }
        // link: `corners` triangles, 3/2 * corners edges, `link_vertices` vertices
        (0..v).map(|i| link_vertices[i] - corners[i] / 2).collect()
    }

    /// Quad following `q` in the cyclic order of its tetrahedron.
    ///
    /// Positively oriented tetrahedra use `0 -> 1 -> 2 -> 0`; negatively
    /// oriented ones the reverse.
    pub fn quad_successor(&self, q: usize) -> usize {
        let t = q / 3;
        let k = q % 3;
        let step = if self.orientation[t] > 0 { 1 } else { 2 };
        3 * t + (k + step) % 3
    }

    pub fn quad_predecessor(&self, q: usize) -> usize {
        let t = q / 3;
        let k = q % 3;
        let step = if self.orientation[t] > 0 { 2 } else { 1 };
        3 * t + (k + step) % 3
    }

    /// Successor map on the three quad types of `tet`.
    pub fn quad_cyclic_order(&self, tet: usize) -> [usize; 3] {
        let mut succ = [0; 3];
        for (k, s) in succ.iter_mut().enumerate() {
            *s = self.quad_successor(3 * tet + k) % 3;
        }
        succ
    }

    /// Per-tetrahedron normal disk data.
    pub fn tet_disks(&self, tet: usize) -> TetDisks {
        let mut pairs = [[0; 2]; 3];
        for (k, pair) in pairs.iter_mut().enumerate() {
            *pair = [6 * tet + QUAD_EDGES[k][0], 6 * tet + QUAD_EDGES[k][1]];
        }
        TetDisks {
            tet,
            opposite_edge_pairs: pairs,
            triangle_types: TRIANGLES_PER_TET,
            quad_types: QUADS_PER_TET,
        }
    }

    /// The same triangulation with tetrahedra renumbered by `new_index[old]`
    /// and the gluing list reversed. Used to check label independence.
    pub fn relabelled(&self, new_index: &[usize]) -> Result<Triangulation> {
        let gluings = self
            .faces
            .iter()
            .rev()
            .map(|fp| Gluing {
                tet: new_index[fp.tet],
                face: fp.face,
                to_tet: new_index[fp.to_tet],
                to_face: fp.to_face,
                perm: fp.perm.to_vec(),
            })
            .collect();
        Triangulation::new(GluingSpec {
            tets: self.num_tets(),
            gluings,
        })
    }
}

/// Assigns a sign to every tetrahedron so that each gluing permutation is
/// odd between equally signed tetrahedra. The first tetrahedron of each
/// component is positive.
fn orient(n: usize, partner: &[FacePair]) -> Result<Vec<i8>> {
    let mut sign = vec![0i8; n];
    for start in 0..n {
        if sign[start] != 0 {
            continue;
        }
        sign[start] = 1;
        let mut queue = VecDeque::from([start]);
        while let Some(t) = queue.pop_front() {
            for f in 0..4 {
                let fp = &partner[4 * t + f];
                let want = -sign[t] * Perm4(fp.perm).sign();
                match sign[fp.to_tet] {
                    0 => {
                        sign[fp.to_tet] = want;
                        queue.push_back(fp.to_tet);
                    }
                    s if s != want => return Err(Error::NonOrientable { tet: fp.to_tet }),
                    _ => {}
                }
            }
        }
    }
    Ok(sign)
}

/// Builds the slot- and class-level edge/quad incidence.
pub fn build_incidence(tri: &Triangulation) -> IncidenceTable {
    let n = tri.num_tets();
    let mut class = vec![vec![0u8; 3 * n]; tri.num_edges()];
    let mut slot_quad = vec![0; 6 * n];
    for t in 0..n {
        for i in 0..6 {
            let q = 3 * t + EDGE_QUAD_TYPE[i];
            slot_quad[6 * t + i] = q;
            class[tri.edge_class(t, i)][q] += 1;
        }
    }
    IncidenceTable { class, slot_quad }
}

/// Loads one of the bundled example triangulations by name.
pub fn fixture(name: &str) -> Option<Triangulation> {
    let text = match name {
        "fig8" => include_str!("../fixtures/fig8.json"),
        "s3_2tet" => include_str!("../fixtures/s3_2tet.json"),
        "p1" => include_str!("../fixtures/p1.json"),
        _ => return None,
    };
    Some(Triangulation::from_json(text).expect("bundled fixture is valid"))
}

pub const FIXTURE_NAMES: [&str; 3] = ["fig8", "s3_2tet", "p1"];
