use crate::error::{Error, Result};

/// Quadrature on the reference simplex with vertices 0, e_1, .., e_d.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub dim: usize,
    /// `dim` reference coordinates per point.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, q: usize) -> &[f64] {
        &self.points[q * self.dim..(q + 1) * self.dim]
    }

    fn from_orbits(dim: usize, orbits: &[(Vec<Vec<f64>>, f64)], exact_degree: usize) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (pts, w) in orbits {
            for p in pts {
                // Barycentric coordinates; drop the first to get reference ones.
                points.extend_from_slice(&p[1..]);
                weights.push(*w);
            }
        }
        QuadratureRule { dim, points, weights, exact_degree }
    }
}

/// All distinct permutations of a barycentric tuple.
fn orbit(bary: &[f64]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..bary.len()).collect();
    permute(&mut idx, 0, &mut |p| {
        let v: Vec<f64> = p.iter().map(|&i| bary[i]).collect();
        if !out.iter().any(|o| o == &v) {
            out.push(v);
        }
    });
    out
}

fn permute(idx: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == idx.len() {
        f(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, f);
        idx.swap(k, i);
    }
}

/// Symmetric rule on the reference triangle or tetrahedron that integrates
/// polynomials of degree `required_degree` exactly.
pub fn quadrature_for(dim: usize, required_degree: usize) -> Result<QuadratureRule> {
    if required_degree > 4 {
        return Err(Error::UnsupportedDegree(required_degree));
    }
    match (dim, required_degree) {
        (2, 0..=1) => Ok(QuadratureRule::from_orbits(2, &[(orbit(&[1.0 / 3.0; 3]), 0.5)], 1)),
        (2, 2) => {
            let o = orbit(&[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]);
            Ok(QuadratureRule::from_orbits(2, &[(o, 1.0 / 6.0)], 2))
        }
        (2, _) => {
            let (a, wa) = (0.445_948_490_915_964_9, 0.223_381_589_678_011_5);
            let (b, wb) = (0.091_576_213_509_770_74, 0.109_951_743_655_321_9);
            Ok(QuadratureRule::from_orbits(
                2,
                &[(orbit(&[1.0 - 2.0 * a, a, a]), 0.5 * wa), (orbit(&[1.0 - 2.0 * b, b, b]), 0.5 * wb)],
                4,
            ))
        }
        (3, 0..=1) => Ok(QuadratureRule::from_orbits(3, &[(orbit(&[0.25; 4]), 1.0 / 6.0)], 1)),
        (3, 2) => {
            let a = (5.0 - 5f64.sqrt()) / 20.0;
            let o = orbit(&[1.0 - 3.0 * a, a, a, a]);
            Ok(QuadratureRule::from_orbits(3, &[(o, 1.0 / 24.0)], 2))
        }
        (3, _) => {
            // 14-point rule, exact to degree 5.
            let a1 = 0.310_885_919_263_300_6;
            let a2 = 0.092_735_250_310_891_23;
            let b = 0.045_503_704_125_649_65;
            Ok(QuadratureRule::from_orbits(
                3,
                &[
                    (orbit(&[1.0 - 3.0 * a1, a1, a1, a1]), 0.112_687_925_718_015_85 / 6.0),
                    (orbit(&[1.0 - 3.0 * a2, a2, a2, a2]), 0.073_493_043_116_361_95 / 6.0),
                    (orbit(&[b, b, 0.5 - b, 0.5 - b]), 0.042_546_020_777_081_47 / 6.0),
                ],
                5,
            ))
        }
        _ => Err(Error::Config(format!("no quadrature for dimension {dim}"))),
    }
}

/// Rule on the reference facet of a `dim`-dimensional cell: the unit interval
/// for triangles, the reference triangle for tetrahedra.
pub fn facet_quadrature_for(dim: usize, required_degree: usize) -> Result<QuadratureRule> {
    if required_degree > 4 {
        return Err(Error::UnsupportedDegree(required_degree));
    }
    match dim {
        2 => {
            let (pts, wts, deg): (Vec<f64>, Vec<f64>, usize) = match required_degree {
                0 | 1 => (vec![0.5], vec![1.0], 1),
                2 | 3 => {
                    let h = 0.5 / 3f64.sqrt();
                    (vec![0.5 - h, 0.5 + h], vec![0.5, 0.5], 3)
                }
                _ => {
                    let h = 0.5 * (0.6f64).sqrt();
                    (vec![0.5 - h, 0.5, 0.5 + h], vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0], 5)
                }
            };
            Ok(QuadratureRule { dim: 1, points: pts, weights: wts, exact_degree: deg })
        }
        3 => quadrature_for(2, required_degree),
        _ => Err(Error::Config(format!("no facet quadrature for dimension {dim}"))),
    }
}
