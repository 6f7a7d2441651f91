//! Structured quadrilateral meshes with Q2 velocity and Q1 pressure nodes.

use alloc::vec;
use alloc::vec::Vec;

use super::{Domain, ProblemSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeTag {
    Interior,
    Dirichlet,
    Neumann,
}

/// Node ids of one element. Q2 order: corners counterclockwise from the
/// lower-left, then the bottom, right, top and left mid-sides, then the
/// center. Q1 order: corners counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Element {
    pub q2: [usize; 9],
    pub q1: [usize; 4],
}

/// Lattice offsets (in half-element units) of the Q2 nodes in local order.
pub const Q2_OFFSETS: [(usize, usize); 9] =
    [(0, 0), (2, 0), (2, 2), (0, 2), (1, 0), (2, 1), (1, 2), (0, 1), (1, 1)];
pub const Q1_OFFSETS: [(usize, usize); 4] = [(0, 0), (2, 0), (2, 2), (0, 2)];

#[derive(Debug, Clone)]
pub struct Mesh {
    pub q2_coords: Vec<[f64; 2]>,
    pub q1_coords: Vec<[f64; 2]>,
    pub elements: Vec<Element>,
    pub q2_tags: Vec<NodeTag>,
    /// Q2 node sharing the position of each Q1 node.
    pub colocation: Vec<usize>,
    /// Element width and height.
    pub h: [f64; 2],
    /// Bounding box `[xmin, xmax, ymin, ymax]`.
    pub bbox: [f64; 4],
}

impl Mesh {
    pub fn n_q2(&self) -> usize {
        self.q2_coords.len()
    }

    pub fn n_q1(&self) -> usize {
        self.q1_coords.len()
    }

    pub fn area(&self) -> f64 {
        self.elements.len() as f64 * self.h[0] * self.h[1]
    }

    /// True when no boundary edge carries a natural (outflow) condition.
    pub fn is_enclosed(&self) -> bool {
        !self.q2_tags.contains(&NodeTag::Neumann)
    }
}

fn is_multiple(x: f64, h: f64) -> bool {
    let r = x / h;
    (r - libm::round(r)).abs() < 1e-9
}

/// Builds the uniform mesh of the requested domain with element size `2/m`.
pub fn build_mesh(spec: &ProblemSpec) -> Result<Mesh> {
    spec.validate()?;
    let m = spec.refinement;
    let h = 2.0 / m as f64;
    let (bbox, hole): ([f64; 4], Option<[f64; 4]>) = match spec.domain {
        Domain::LidCavity => ([-1.0, 1.0, -1.0, 1.0], None),
        Domain::BackwardStep { length } => {
            if m % 2 != 0 {
                return Err(Error::InvalidProblem("backward step needs an even refinement".into()));
            }
            ([-1.0, length, -1.0, 1.0], Some([-1.0, 0.0, -1.0, 0.0]))
        }
        Domain::Obstacle { length, obstacle } => {
            if !obstacle.iter().all(|&c| is_multiple(c, h))
                || obstacle[0] <= 0.0
                || obstacle[1] >= length
                || obstacle[2] <= -1.0
                || obstacle[3] >= 1.0
                || obstacle[0] >= obstacle[1]
                || obstacle[2] >= obstacle[3]
            {
                return Err(Error::MisalignedObstacle { refinement: m });
            }
            ([0.0, length, -1.0, 1.0], Some(obstacle))
        }
    };
    let nx_f = (bbox[1] - bbox[0]) / h;
    let nx = libm::round(nx_f) as usize;
    if (nx_f - nx as f64).abs() > 1e-9 || nx == 0 {
        return Err(Error::InvalidProblem("channel length is not a multiple of the element size".into()));
    }
    let ny = m;
    let dx = (bbox[1] - bbox[0]) / (2 * nx) as f64;
    let dy = (bbox[3] - bbox[2]) / (2 * ny) as f64;
    let coord = |i: usize, j: usize| [bbox[0] + i as f64 * dx, bbox[2] + j as f64 * dy];

    let active: Vec<bool> = (0..nx * ny)
        .map(|e| {
            let (ei, ej) = (e % nx, e / nx);
            let c = coord(2 * ei + 1, 2 * ej + 1);
            match hole {
                Some(r) => !(c[0] > r[0] && c[0] < r[1] && c[1] > r[2] && c[1] < r[3]),
                None => true,
            }
        })
        .collect();
    let is_active = |ei: isize, ej: isize| {
        ei >= 0 && ej >= 0 && (ei as usize) < nx && (ej as usize) < ny && active[ej as usize * nx + ei as usize]
    };

    let (lx, ly) = (2 * nx + 1, 2 * ny + 1);
    let mut used = vec![false; lx * ly];
    for e in 0..nx * ny {
        if !active[e] {
            continue;
        }
        let (ei, ej) = (e % nx, e / nx);
        for &(a, b) in &Q2_OFFSETS {
            used[(2 * ej + b) * lx + 2 * ei + a] = true;
        }
    }
    let mut q2_id = vec![usize::MAX; lx * ly];
    let mut q1_id = vec![usize::MAX; lx * ly];
    let mut q2_coords = Vec::new();
    let mut q1_coords = Vec::new();
    let mut colocation = Vec::new();
    for j in 0..ly {
        for i in 0..lx {
            let l = j * lx + i;
            if !used[l] {
                continue;
            }
            q2_id[l] = q2_coords.len();
            q2_coords.push(coord(i, j));
            if i % 2 == 0 && j % 2 == 0 {
                q1_id[l] = q1_coords.len();
                q1_coords.push(coord(i, j));
                colocation.push(q2_id[l]);
            }
        }
    }

    let mut elements = Vec::new();
    let mut q2_tags = vec![NodeTag::Interior; q2_coords.len()];
    let mut on_dirichlet = vec![false; q2_coords.len()];
    let mut on_neumann = vec![false; q2_coords.len()];
    let outflow = !matches!(spec.domain, Domain::LidCavity);
    for e in 0..nx * ny {
        if !active[e] {
            continue;
        }
        let (ei, ej) = (e % nx, e / nx);
        let node = |a: usize, b: usize| q2_id[(2 * ej + b) * lx + 2 * ei + a];
        let mut q2 = [0; 9];
        for (k, &(a, b)) in Q2_OFFSETS.iter().enumerate() {
            q2[k] = node(a, b);
        }
        let mut q1 = [0; 4];
        for (k, &(a, b)) in Q1_OFFSETS.iter().enumerate() {
            q1[k] = q1_id[(2 * ej + b) * lx + 2 * ei + a];
        }
        elements.push(Element { q2, q1 });
        let (si, sj) = (ei as isize, ej as isize);
        // bottom, right, top, left sides: neighbor offset and the three nodes on the side
        let sides: [((isize, isize), [(usize, usize); 3]); 4] = [
            ((0, -1), [(0, 0), (1, 0), (2, 0)]),
            ((1, 0), [(2, 0), (2, 1), (2, 2)]),
            ((0, 1), [(0, 2), (1, 2), (2, 2)]),
            ((-1, 0), [(0, 0), (0, 1), (0, 2)]),
        ];
        for (side, ((di, dj), nodes)) in sides.iter().enumerate() {
            if is_active(si + di, sj + dj) {
                continue;
            }
            let natural = outflow && side == 1 && ei + 1 == nx;
            for &(a, b) in nodes {
                let n = node(a, b);
                if natural {
                    on_neumann[n] = true;
                } else {
                    on_dirichlet[n] = true;
                }
            }
        }
    }
    for n in 0..q2_coords.len() {
        q2_tags[n] = if on_dirichlet[n] {
            NodeTag::Dirichlet
        } else if on_neumann[n] {
            NodeTag::Neumann
        } else {
            NodeTag::Interior
        };
    }
    Ok(Mesh { q2_coords, q1_coords, elements, q2_tags, colocation, h: [2.0 * dx, 2.0 * dy], bbox })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cavity(m: usize) -> Mesh {
        build_mesh(&ProblemSpec::lid_cavity(m)).unwrap()
    }

    #[test]
    fn single_element_counts() {
        let mesh = cavity(1);
        assert_eq!(mesh.n_q2(), 9);
        assert_eq!(mesh.n_q1(), 4);
        assert_eq!(mesh.elements[0].q2, [0, 2, 8, 6, 1, 5, 7, 3, 4]);
    }

    #[test]
    fn cavity_dof_totals() {
        for (m, total) in [(8, 659), (16, 2467), (32, 9539), (64, 37507)] {
            let mesh = cavity(m);
            assert_eq!(2 * mesh.n_q2() + mesh.n_q1(), total);
        }
    }

    #[test]
    fn colocation_is_bitwise_exact() {
        let mesh = build_mesh(&ProblemSpec::backward_step(4, 0.02, 5.0)).unwrap();
        for (p, &v) in mesh.colocation.iter().enumerate() {
            assert_eq!(mesh.q1_coords[p], mesh.q2_coords[v]);
        }
    }

    #[test]
    fn step_tags_outflow_as_neumann() {
        let mesh = build_mesh(&ProblemSpec::backward_step(4, 0.02, 5.0)).unwrap();
        for (n, c) in mesh.q2_coords.iter().enumerate() {
            let tag = mesh.q2_tags[n];
            if c[0] == 5.0 && c[1].abs() < 1.0 {
                assert_eq!(tag, NodeTag::Neumann);
            }
            if c[0] == 5.0 && c[1].abs() == 1.0 {
                assert_eq!(tag, NodeTag::Dirichlet);
            }
            if c[0] == 0.0 && c[1] < 0.0 {
                assert_eq!(tag, NodeTag::Dirichlet);
            }
        }
        assert!((mesh.area() - 11.0).abs() < 1e-12);
        assert!(!mesh.is_enclosed());
    }

    #[test]
    fn obstacle_alignment_is_checked() {
        assert!(build_mesh(&ProblemSpec::obstacle(8, 0.02)).is_ok());
        assert!(matches!(
            build_mesh(&ProblemSpec::obstacle(4, 0.02)),
            Err(Error::MisalignedObstacle { refinement: 4 })
        ));
        let mesh = build_mesh(&ProblemSpec::obstacle(8, 0.02)).unwrap();
        assert!((mesh.area() - (16.0 - 0.25)).abs() < 1e-12);
    }
}
