//! Least-squares solution of the transport equation `(X + λV)u = f` on the
//! torus, in the space of fiber degree `≤ N` and base frequencies resolved
//! by the grid.
//!
//! The operator is assembled column by column in the Fourier basis of the
//! grid (Nyquist bins excluded, since their derivative is not defined). Its
//! columns split into groups that share no rows; on a flat torus with
//! constant intensity each group is a single base frequency. Every group is
//! solved by a complex SVD with a relative rank threshold, and the kernel
//! dimensions are summed.

use crate::error::{Error, Result};
use crate::fiber::FiberFunction;
use crate::geometry::SurfaceModel;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use serde::Serialize;

/// Singular values below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct TransportSolution {
    /// Solution with `⟨u, 1⟩ = 0`.
    pub u: FiberFunction,
    /// `‖(X + λV)u − f‖`.
    pub residual: f64,
    pub relative_residual: f64,
    /// Energy of `u` per fiber degree.
    pub degree_profile: Vec<(i32, f64)>,
    /// Dimension of the kernel of the truncated operator; constants always
    /// contribute one.
    pub kernel_dim: usize,
    pub blocks: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DegreeEnergy {
    pub k: i32,
    pub energy: f64,
}

impl TransportSolution {
    /// Fraction of the energy of `u` in degrees `|k| ≤ m`.
    pub fn energy_fraction_within(&self, m: i32) -> f64 {
        let total: f64 = self.degree_profile.iter().map(|p| p.1).sum();
        let inner: f64 = self.degree_profile.iter().filter(|p| p.0.abs() <= m).map(|p| p.1).sum();
        if total == 0.0 {
            1.0
        } else {
            inner / total
        }
    }

    pub fn profile_records(&self) -> Vec<DegreeEnergy> {
        self.degree_profile.iter().map(|&(k, energy)| DegreeEnergy { k, energy }).collect()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut j = i;
        while self.0[j] != r {
            let next = self.0[j];
            self.0[j] = r;
            j = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

/// Solve `(X + λV)u = f` in the least-squares sense for `u` of fiber degree
/// `≤ band`. Fails with [`Error::RankDeficient`] when the truncated operator
/// has a kernel beyond the constants.
pub fn truncated_transport_solve(f: &FiberFunction, band: usize) -> Result<TransportSolution> {
    let grid = f.grid().clone();
    if grid.model() != SurfaceModel::FlatTorusConformal {
        return Err(Error::Precondition("the Galerkin transport solve needs the global Fourier basis of the torus".into()));
    }
    if grid.band_limit() < band + 1 {
        return Err(Error::Precondition(format!("grid band limit {} below {}", grid.band_limit(), band + 1)));
    }
    let kout = band + 1;
    if f.kmax() > kout {
        let prof = f.energy_profile();
        let beyond: f64 = prof.iter().filter(|p| p.0.unsigned_abs() as usize > kout).map(|p| p.1).sum();
        if beyond > 0.0 {
            return Err(Error::Precondition(format!("right-hand side has fiber degree above {kout}")));
        }
    }
    let n = grid.base().n;
    let nn = n * n;
    let fft = &grid.fft;
    let nyquist = |m: usize| n.is_multiple_of(2) && 2 * m == n;
    let freqs: Vec<usize> = (0..nn).filter(|&i| !nyquist(i % n) && !nyquist(i / n)).collect();
    let degrees_in: Vec<i32> = (-(band as i32)..=band as i32).collect();
    let rows = (2 * kout + 1) * nn;
    let row_of = |k: i32, bin: usize| (k + kout as i32) as usize * nn + bin;

    // columns of the operator in the Fourier basis
    let mut cols: Vec<(i32, usize, Vec<(usize, C)>)> = Vec::with_capacity(degrees_in.len() * freqs.len());
    let mut scale: f64 = 0.0;
    for &k in &degrees_in {
        for &bin in &freqs {
            let mut basis = FiberFunction::zeros(&grid, band)?;
            let mut spec = vec![C::new(0.0, 0.0); nn];
            spec[bin] = C::new(1.0, 0.0);
            fft.inverse(&mut spec);
            basis.mode_mut(k).copy_from_slice(&spec);
            let image = basis.apply_generator()?;
            let mut entries = Vec::new();
            for j in image.degrees() {
                let m = image.mode(j).unwrap();
                if m.iter().all(|v| v.norm_sqr() == 0.0) {
                    continue;
                }
                let mut s = m.to_vec();
                fft.forward(&mut s);
                for (b, v) in s.into_iter().enumerate() {
                    if v.norm_sqr() > 0.0 {
                        scale = scale.max(v.norm());
                        entries.push((row_of(j, b), v));
                    }
                }
            }
            cols.push((k, bin, entries));
        }
    }
    // drop round-off couplings before looking for independent groups
    let cut = 1e-13 * scale;
    for c in cols.iter_mut() {
        c.2.retain(|e| e.1.norm() > cut);
    }
    let mut uf = UnionFind((0..cols.len() + rows).collect());
    for (ci, c) in cols.iter().enumerate() {
        for &(r, _) in &c.2 {
            uf.union(ci, cols.len() + r);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for ci in 0..cols.len() {
        let root = uf.find(ci);
        groups.entry(root).or_default().push(ci);
    }

    // right-hand side in the same basis
    let mut rhs = vec![C::new(0.0, 0.0); rows];
    for j in f.degrees() {
        if j.unsigned_abs() as usize > kout {
            continue;
        }
        let mut s = f.mode(j).unwrap().to_vec();
        fft.forward(&mut s);
        for (b, v) in s.into_iter().enumerate() {
            rhs[row_of(j, b)] = v;
        }
    }

    let mut coef = vec![C::new(0.0, 0.0); cols.len()];
    let mut kernel_dim = 0;
    for members in groups.values() {
        let mut row_index: Vec<usize> = members.iter().flat_map(|&ci| cols[ci].2.iter().map(|e| e.0)).collect();
        row_index.sort_unstable();
        row_index.dedup();
        if row_index.is_empty() {
            kernel_dim += members.len();
            continue;
        }
        let pos = |r: usize| row_index.binary_search(&r).unwrap();
        let mut a = DMatrix::<C>::zeros(row_index.len(), members.len());
        for (j, &ci) in members.iter().enumerate() {
            for &(r, v) in &cols[ci].2 {
                a[(pos(r), j)] = v;
            }
        }
        let b = DVector::from_iterator(row_index.len(), row_index.iter().map(|&r| rhs[r]));
        let svd = a.svd(true, true);
        let thresh = RANK_TOL * scale;
        let rank = svd.singular_values.iter().filter(|&&s| s > thresh).count();
        kernel_dim += members.len() - rank;
        let x = svd.solve(&b, thresh).map_err(|e| Error::Precondition(format!("SVD solve failed: {e}")))?;
        for (j, &ci) in members.iter().enumerate() {
            coef[ci] = x[j];
        }
    }
    if kernel_dim > 1 {
        return Err(Error::RankDeficient { kernel_dim });
    }

    let mut u = FiberFunction::zeros(&grid, band)?;
    for &k in &degrees_in {
        let mut spec = vec![C::new(0.0, 0.0); nn];
        for (ci, c) in cols.iter().enumerate() {
            if c.0 == k {
                spec[c.1] = coef[ci];
            }
        }
        fft.inverse(&mut spec);
        u.mode_mut(k).copy_from_slice(&spec);
    }
    let one = FiberFunction::constant(&grid, C::new(1.0, 0.0));
    let mean = u.inner_product(&one)? / one.inner_product(&one)?;
    let u = u.sub(&one.scale(mean));
    let residual = u.apply_generator()?.sub(f).l2_norm();
    let fnorm = f.l2_norm();
    Ok(TransportSolution {
        degree_profile: u.energy_profile(),
        u,
        residual,
        relative_residual: if fnorm > 0.0 { residual / fnorm } else { residual },
        kernel_dim,
        blocks: groups.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{random_fiber_function, PhaseGrid, RandomFiberSpec};
    use crate::geometry::{BaseFunction, MagneticSurface, RealTerm};
    use crate::tomography::make_potential;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn grid(lambda: f64, n: usize) -> Arc<PhaseGrid> {
        PhaseGrid::new(Arc::new(MagneticSurface::flat_torus(lambda)), n, 5).unwrap()
    }

    fn gauge(a: &FiberFunction) -> FiberFunction {
        let one = FiberFunction::constant(a.grid(), C::new(1.0, 0.0));
        let m = a.inner_product(&one).unwrap() / one.inner_product(&one).unwrap();
        a.sub(&one.scale(m))
    }

    #[test]
    fn constructed_potentials_are_recovered() {
        let g = grid(0.5, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec = RandomFiberSpec { max_degree: 1, real: true, base_band: 3, ..Default::default() };
        for _ in 0..3 {
            let a = random_fiber_function(g.model(), &spec, &mut rng).sample(&g).unwrap();
            let f = make_potential(&a).unwrap();
            let sol = truncated_transport_solve(&f, 3).unwrap();
            let err = sol.u.sub(&gauge(&a)).l2_norm() / a.l2_norm();
            assert!(err < 1e-8, "{err}");
            assert!(sol.energy_fraction_within(1) > 0.999999);
            assert!(sol.relative_residual < 1e-10);
            assert_eq!(sol.kernel_dim, 1);
        }
    }

    #[test]
    fn zero_gives_zero_and_constants_are_obstructed() {
        let g = grid(0.5, 12);
        let sol = truncated_transport_solve(&FiberFunction::zeros(&g, 0).unwrap(), 2).unwrap();
        assert_eq!(sol.u.l2_norm(), 0.0);
        let one = FiberFunction::constant(&g, C::new(1.0, 0.0));
        let sol = truncated_transport_solve(&one, 2).unwrap();
        assert!(sol.relative_residual > 0.5, "{}", sol.relative_residual);
    }

    #[test]
    fn flat_geodesic_flow_has_invariant_fiber_modes() {
        // with λ = 0 the functions e^{ikθ} are invariant, one per degree
        let g = grid(0.0, 12);
        let one = FiberFunction::constant(&g, C::new(1.0, 0.0));
        match truncated_transport_solve(&one, 2) {
            Err(Error::RankDeficient { kernel_dim }) => assert_eq!(kernel_dim, 5),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn curved_torus_recovery_and_band_refinement() {
        let phi = BaseFunction::from_real_terms(&[RealTerm { n: [1, 0], cos: 0.08, sin: 0.0 }]);
        let lam = BaseFunction::from_real_terms(&[RealTerm { n: [0, 0], cos: 0.6, sin: 0.0 }, RealTerm { n: [0, 1], cos: 0.1, sin: 0.0 }]);
        let s = MagneticSurface::torus(phi, lam).unwrap();
        let g = PhaseGrid::new(Arc::new(s), 8, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let spec = RandomFiberSpec { max_degree: 1, real: true, base_band: 1, ..Default::default() };
        let a = random_fiber_function(g.model(), &spec, &mut rng).sample(&g).unwrap();
        let sol = truncated_transport_solve(&make_potential(&a).unwrap(), 2).unwrap();
        assert!(sol.u.sub(&gauge(&a)).l2_norm() / a.l2_norm() < 1e-6);
        // nested spaces: the residual for a non-potential cannot grow with the band
        let q = random_fiber_function(g.model(), &RandomFiberSpec { max_degree: 2, real: true, base_band: 1, ..Default::default() }, &mut rng)
            .sample(&g)
            .unwrap();
        let r: Vec<f64> = (2..=4).map(|b| truncated_transport_solve(&q, b).unwrap().residual).collect();
        assert!(r[1] <= r[0] * (1.0 + 1e-9) && r[2] <= r[1] * (1.0 + 1e-9), "{r:?}");
    }

    #[test]
    fn octagon_is_rejected() {
        let g = PhaseGrid::new(Arc::new(MagneticSurface::bolza(0.0)), 16, 4).unwrap();
        assert!(truncated_transport_solve(&FiberFunction::zeros(&g, 0).unwrap(), 2).is_err());
    }
}
