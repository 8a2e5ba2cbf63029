//! Analytic coincidence models.
//!
//! Coherent light: a Michelson-Linnik interferometer (BS1) followed by a
//! second splitter (BS2) feeding two single-photon spectrometers. Both
//! splitters share `(theta, phi_t, phi_r)`.
//!
//! Entangled pairs: `P_qc = |phi(w, w')|^2 |f(w) - f(w')|^2` with a bivariate
//! Gaussian joint spectral intensity.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::scene::Scene;
use crate::spectral::{ComplexSpectrum, GaussianProfile, JointSpectrum, SpectralGrid, SpectrumKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitter {
    pub theta: f64,
    pub phi_t: f64,
    pub phi_r: f64,
}

impl BeamSplitter {
    /// 50:50, no extra phases.
    pub fn balanced() -> Self {
        Self {
            theta: std::f64::consts::FRAC_PI_2,
            phi_t: 0.0,
            phi_r: 0.0,
        }
    }

    pub fn transmittance(&self) -> f64 {
        (self.theta / 2.0).cos().powi(2)
    }

    pub fn reflectance(&self) -> f64 {
        (self.theta / 2.0).sin().powi(2)
    }
}

/// Splitter matrix acting on the input creation operators:
///
/// ```text
/// [  cos(t/2) e^{i phi_t}    sin(t/2) e^{i phi_r} ]
/// [ -sin(t/2) e^{-i phi_r}   cos(t/2) e^{-i phi_t} ]
/// ```
pub fn bs_matrix(bs: &BeamSplitter) -> [[Complex64; 2]; 2] {
    let (s, c) = (bs.theta / 2.0).sin_cos();
    [
        [Complex64::from_polar(c, bs.phi_t), Complex64::from_polar(s, bs.phi_r)],
        [-Complex64::from_polar(s, -bs.phi_r), Complex64::from_polar(c, -bs.phi_t)],
    ]
}

/// How the BS2 output port feeding detector B is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PortB {
    /// `beta = gamma c s^2 e^{i(phi_t - 2 phi_r)} + zeta c s^2 e^{-i(phi_t + 2 phi_r)}`,
    /// the closed form of the full-system transformation.
    #[default]
    Printed,
    /// `beta = Omega s e^{-i phi_r}`, splitting the single BS1 output mode
    /// `Omega = gamma c^2 e^{2 i phi_t} - zeta s^2` at BS2. Both detectors then
    /// see the same fringe term.
    Cascade,
}

impl PortB {
    pub fn as_str(&self) -> &'static str {
        match self {
            PortB::Printed => "printed",
            PortB::Cascade => "cascade",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "printed" => Some(PortB::Printed),
            "cascade" => Some(PortB::Cascade),
            _ => None,
        }
    }
}

/// Port amplitudes at one frequency. `a` is the input amplitude `alpha u(omega)`,
/// `f` the object transfer, `tau` the reference delay.
pub fn port_amplitudes(
    a: Complex64,
    f: Complex64,
    omega: f64,
    bs: &BeamSplitter,
    tau: f64,
    port_b: PortB,
) -> (Complex64, Complex64) {
    // cos^2 and sin^2 from cos(theta) so that the balanced case is exactly 1/2
    let cos_t = bs.theta.cos();
    let (c2, s2) = ((1.0 + cos_t) / 2.0, (1.0 - cos_t) / 2.0);
    let (c, s) = (c2.sqrt(), s2.sqrt());
    let gamma = a * f;
    let zeta = a * Complex64::from_polar(1.0, -omega * tau);
    let i = Complex64::i();
    let alpha_t = c * (gamma * c2 * (i * 3.0 * bs.phi_t).exp() - zeta * s2 * (i * bs.phi_t).exp());
    let beta_t = match port_b {
        PortB::Printed => {
            c * s2 * (gamma * (i * (bs.phi_t - 2.0 * bs.phi_r)).exp() + zeta * (-i * (bs.phi_t + 2.0 * bs.phi_r)).exp())
        }
        PortB::Cascade => {
            let omega_mode = gamma * c2 * (i * 2.0 * bs.phi_t).exp() - zeta * s2;
            omega_mode * Complex64::from_polar(s, -bs.phi_r)
        }
    };
    (alpha_t, beta_t)
}

/// Attenuated pulsed laser with a Gaussian amplitude spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentSource {
    alpha: f64,
    profile: GaussianProfile,
    rep_rate: f64,
}

impl CoherentSource {
    pub fn new(alpha: f64, profile: GaussianProfile, rep_rate: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return invalid(format!("alpha must be finite and non-negative, got {alpha}"));
        }
        if !(profile.sigma_omega > 0.0 && profile.center_omega > 0.0) {
            return invalid("source profile needs positive centre and width");
        }
        if !(rep_rate > 0.0 && rep_rate.is_finite()) {
            return invalid("repetition rate must be positive");
        }
        Ok(Self {
            alpha,
            profile,
            rep_rate,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn profile(&self) -> &GaussianProfile {
        &self.profile
    }

    pub fn rep_rate(&self) -> f64 {
        self.rep_rate
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.profile, self.rep_rate)
    }

    /// Peak-normalised `u` on `grid`.
    pub fn spectrum(&self, grid: &SpectralGrid) -> ComplexSpectrum {
        self.profile.sample(grid)
    }
}

/// `(alpha_tilde, beta_tilde)` on the grid of `f`.
pub fn output_amplitudes(
    src: &CoherentSource,
    f: &ComplexSpectrum,
    bs: &BeamSplitter,
    tau: f64,
    port_b: PortB,
) -> (ComplexSpectrum, ComplexSpectrum) {
    let grid = *f.grid();
    let u = src.spectrum(&grid);
    let (mut at, mut bt) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    for k in 0..grid.len() {
        let (a, b) = port_amplitudes(src.alpha * u.values()[k], f.values()[k], grid.omega_at(k), bs, tau, port_b);
        at.push(a);
        bt.push(b);
    }
    (
        ComplexSpectrum::new(grid, at).expect("finite amplitudes"),
        ComplexSpectrum::new(grid, bt).expect("finite amplitudes"),
    )
}

/// Default photons per pulse per unit `alpha^2`; with `alpha = 0.1` one photon
/// enters the interferometer per pulse.
pub const DEFAULT_PHOTONS_PER_ALPHA_SQ: f64 = 100.0;
pub const DEFAULT_BIN_SUBSAMPLES: usize = 32;

/// Everything needed to turn a scene into per-bin click probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentSetup {
    pub source: CoherentSource,
    pub splitter: BeamSplitter,
    pub tau: f64,
    pub port_b: PortB,
    /// Mean photon number entering the interferometer per pulse is
    /// `photons_per_alpha_sq * alpha^2`.
    pub photons_per_alpha_sq: f64,
    /// Spectrometer resolution (rad/s). `None` samples each bin at its centre.
    pub bin_width: Option<f64>,
    pub bin_subsamples: usize,
}

impl CoherentSetup {
    pub fn new(source: CoherentSource, splitter: BeamSplitter) -> Self {
        Self {
            source,
            splitter,
            tau: 0.0,
            port_b: PortB::default(),
            photons_per_alpha_sq: DEFAULT_PHOTONS_PER_ALPHA_SQ,
            bin_width: None,
            bin_subsamples: DEFAULT_BIN_SUBSAMPLES,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.photons_per_alpha_sq > 0.0 && self.photons_per_alpha_sq.is_finite()) {
            return invalid("photons_per_alpha_sq must be positive");
        }
        if let Some(w) = self.bin_width {
            if !(w > 0.0 && w.is_finite()) {
                return invalid("bin width must be positive");
            }
            if self.bin_subsamples == 0 {
                return invalid("bin_subsamples must be at least 1");
            }
        }
        Ok(())
    }

    /// `|alpha_tilde|^2` and `|beta_tilde|^2` per bin, averaged over the bin
    /// width when one is set.
    pub fn port_intensities(&self, scene: &Scene, grid: &SpectralGrid) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        let reference = grid.center();
        let offsets: Vec<f64> = match self.bin_width {
            None => vec![0.0],
            Some(w) => {
                let s = self.bin_subsamples as f64;
                (0..self.bin_subsamples).map(|j| -w / 2.0 + (j as f64 + 0.5) * w / s).collect()
            }
        };
        let n = grid.len();
        let (mut ia, mut ib) = (vec![0.0; n], vec![0.0; n]);
        for &off in &offsets {
            let g = if off == 0.0 { *grid } else { grid.shifted(off)? };
            let u = self.source.spectrum(&g);
            let f = scene.transfer(&g, reference);
            for k in 0..n {
                let a = self.source.alpha * u.values()[k];
                let (x, y) = port_amplitudes(a, f.values()[k], g.omega_at(k), &self.splitter, self.tau, self.port_b);
                ia[k] += x.norm_sqr();
                ib[k] += y.norm_sqr();
            }
        }
        let m = offsets.len() as f64;
        ia.iter_mut().chain(ib.iter_mut()).for_each(|v| *v /= m);
        Ok((ia, ib))
    }

    /// Mean photon number per bin from a spectral intensity `|.|^2`.
    fn photon_numbers(&self, grid: &SpectralGrid, intensity: &[f64]) -> Vec<f64> {
        let norm: f64 = self.source.spectrum(grid).norm_sqr().iter().sum();
        intensity.iter().map(|v| self.photons_per_alpha_sq * v / norm).collect()
    }

    /// Mean number of photons entering the interferometer per pulse.
    pub fn input_photons(&self) -> f64 {
        self.photons_per_alpha_sq * self.source.alpha * self.source.alpha
    }

    /// Per-bin click probabilities `1 - exp(-n_k)` for detectors A and B.
    pub fn click_probabilities(&self, scene: &Scene, grid: &SpectralGrid) -> Result<(Vec<f64>, Vec<f64>)> {
        let (ia, ib) = self.port_intensities(scene, grid)?;
        let click = |v: Vec<f64>| v.into_iter().map(|n| -(-n).exp_m1()).collect::<Vec<f64>>();
        Ok((click(self.photon_numbers(grid, &ia)), click(self.photon_numbers(grid, &ib))))
    }

    pub fn joint_spectrum(&self, scene: &Scene, grid: &SpectralGrid) -> Result<JointSpectrum> {
        let (pa, pb) = self.click_probabilities(scene, grid)?;
        let mut js = JointSpectrum::outer(*grid, &pa, *grid, &pb, SpectrumKind::Probability)?
            .with_meta("model", "coherent")
            .with_meta("alpha", self.source.alpha)
            .with_meta("theta", self.splitter.theta)
            .with_meta("phi_t", self.splitter.phi_t)
            .with_meta("phi_r", self.splitter.phi_r)
            .with_meta("tau_s", self.tau)
            .with_meta("port_b", self.port_b.as_str())
            .with_meta("photons_per_alpha_sq", self.photons_per_alpha_sq)
            .with_meta("sigma_omega", self.source.profile.sigma_omega)
            .with_meta("width_convention", "sigma_lambda is the amplitude standard deviation");
        if let Some(w) = self.bin_width {
            js.metadata.insert("bin_width_rad_per_s".into(), w.to_string());
        }
        Ok(js)
    }
}

/// Point-sampled coherent joint spectrum for a precomputed transfer function.
pub fn coherent_joint_spectrum(
    src: &CoherentSource,
    f: &ComplexSpectrum,
    bs: &BeamSplitter,
    tau: f64,
) -> Result<JointSpectrum> {
    let grid = *f.grid();
    let (at, bt) = output_amplitudes(src, f, bs, tau, PortB::default());
    let setup = CoherentSetup {
        tau,
        ..CoherentSetup::new(*src, *bs)
    };
    let click = |v: Vec<f64>| v.into_iter().map(|n| -(-n).exp_m1()).collect::<Vec<f64>>();
    let pa = click(setup.photon_numbers(&grid, &at.norm_sqr()));
    let pb = click(setup.photon_numbers(&grid, &bt.norm_sqr()));
    Ok(JointSpectrum::outer(grid, &pa, grid, &pb, SpectrumKind::Probability)?.with_meta("model", "coherent"))
}

/// Gaussian photon-pair source. Widths are amplitude standard deviations in
/// rad/s; `rho < 0` means anti-correlated frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiphotonSource {
    sigma: f64,
    sigma_prime: f64,
    rho: f64,
    center: f64,
}

impl BiphotonSource {
    pub fn new(sigma: f64, sigma_prime: f64, rho: f64, center: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma_prime > 0.0 && sigma.is_finite() && sigma_prime.is_finite()) {
            return invalid("biphoton widths must be positive");
        }
        if !(rho > -1.0 && rho < 1.0) {
            return invalid(format!("correlation rho = {rho} outside (-1, 1)"));
        }
        if !(center > 0.0 && center.is_finite()) {
            return invalid("biphoton centre frequency must be positive");
        }
        Ok(Self {
            sigma,
            sigma_prime,
            rho,
            center,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sigma_prime(&self) -> f64 {
        self.sigma_prime
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    /// `|phi|^2` at detunings `(d, dp)` from the centre.
    pub fn intensity(&self, d: f64, dp: f64) -> f64 {
        let (x, y) = (d / self.sigma, dp / self.sigma_prime);
        let q = 1.0 - self.rho * self.rho;
        let e = (x * x + y * y - 2.0 * self.rho * x * y) / q;
        (-e).exp() / (std::f64::consts::PI * self.sigma * self.sigma_prime * q.sqrt())
    }
}

/// Joint spectral intensity on `grid x grid`, as a density per rad^2/s^2.
pub fn biphoton_jsa(src: &BiphotonSource, grid: &SpectralGrid) -> Result<JointSpectrum> {
    let n = grid.len();
    let offset = grid.center() - src.center;
    let det: Vec<f64> = (0..n).map(|k| offset + grid.detuning_at(k)).collect();
    let mut values = Vec::with_capacity(n * n);
    for &d in &det {
        values.extend(det.iter().map(|&dp| src.intensity(d, dp)));
    }
    Ok(JointSpectrum::new(*grid, *grid, values, SpectrumKind::Density)?
        .with_meta("model", "biphoton_jsa")
        .with_meta("rho", src.rho)
        .with_meta("sigma_omega", src.sigma)
        .with_meta("sigma_prime_omega", src.sigma_prime))
}

/// `|phi(w, w')|^2 |f(w) - f(w')|^2`.
pub fn biphoton_joint_spectrum(jsa: &JointSpectrum, f: &ComplexSpectrum) -> Result<JointSpectrum> {
    if jsa.kind() != SpectrumKind::Density {
        return Err(Error::InvalidInput("biphoton JSA must be a density".into()));
    }
    jsa.grid_a().ensure_same(f.grid(), "JSA rows vs transfer function")?;
    jsa.grid_b().ensure_same(f.grid(), "JSA columns vs transfer function")?;
    let fv = f.values();
    let n = fv.len();
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        let row = jsa.row(i);
        values.extend((0..n).map(|j| row[j] * (fv[i] - fv[j]).norm_sqr()));
    }
    let mut out = JointSpectrum::new(*f.grid(), *f.grid(), values, SpectrumKind::Density)?;
    out.metadata = jsa.metadata.clone();
    out.metadata.insert("model".into(), "biphoton".into());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{mirror_transfer, MirrorObject};
    use crate::spectral::make_grid;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const NM: f64 = 1e-9;

    fn grid() -> SpectralGrid {
        make_grid(1550.0 * NM, 600.0 * NM, 64).unwrap()
    }

    fn source(alpha: f64) -> CoherentSource {
        CoherentSource::new(alpha, GaussianProfile::from_wavelength(1550.0 * NM, 100.0 * NM).unwrap(), 1e8).unwrap()
    }

    fn rand_c(r: f64, p: f64) -> Complex64 {
        Complex64::from_polar(r, p)
    }

    #[test]
    fn balanced_splitter_entries() {
        let u = bs_matrix(&BeamSplitter::balanced());
        for row in u {
            for v in row {
                assert_relative_eq!(v.norm(), 1.0 / 2f64.sqrt(), max_relative = 1e-15);
            }
        }
    }

    #[test]
    fn full_transmission_is_diagonal() {
        let u = bs_matrix(&BeamSplitter { theta: 0.0, phi_t: 0.4, phi_r: 1.1 });
        assert_eq!(u[0][1].norm(), 0.0);
        assert_eq!(u[1][0].norm(), 0.0);
        assert_relative_eq!(u[0][0].arg(), 0.4, epsilon = 1e-15);
        assert_relative_eq!(u[1][1].arg(), -0.4, epsilon = 1e-15);
    }

    #[test]
    fn dark_port_is_exactly_null() {
        let g = grid();
        let f = ComplexSpectrum::constant(g, Complex64::new(1.0, 0.0));
        let (a, _) = output_amplitudes(&source(0.1), &f, &BeamSplitter::balanced(), 0.0, PortB::Printed);
        assert!(a.values().iter().all(|v| v.norm() < 1e-17));
        let js = coherent_joint_spectrum(&source(0.1), &f, &BeamSplitter::balanced(), 0.0).unwrap();
        assert!(js.values().iter().all(|&v| v < 1e-15));
    }

    #[test]
    fn no_object_port_b_oracle() {
        // f = 0: beta = zeta c s^2 e^{-i(phi_t + 2 phi_r)}, so |beta|^2 = |a|^2 c^2 s^4.
        let bs = BeamSplitter { theta: 1.1, phi_t: 0.3, phi_r: -0.7 };
        let (s, c) = (0.55f64.sin(), 0.55f64.cos());
        for (a, w) in [(rand_c(0.3, 0.2), 1.2e15), (rand_c(1.0, -2.0), 1.1e15)] {
            let (_, b) = port_amplitudes(a, Complex64::new(0.0, 0.0), w, &bs, 3e-14, PortB::Printed);
            assert_relative_eq!(b.norm_sqr(), a.norm_sqr() * c * c * s.powi(4), max_relative = 1e-12);
        }
    }

    /// At theta = pi/2 the printed port-B amplitude has modulus
    /// `|a| |f e^{2 i phi_t} + 1| / (2 sqrt 2)` for every phase choice, while
    /// port A carries `|f e^{2 i phi_t} - 1|`. No `(phi_t, phi_r)` gives the
    /// `|f - 1|^2` form in both factors. Splitting the single BS1 output mode
    /// (`PortB::Cascade`) does, with prefactor 1/8 in each exponent.
    #[test]
    fn simplified_two_factor_form() {
        let a = rand_c(0.7, 0.4);
        let fs = [rand_c(0.9, 1.3), rand_c(0.2, -2.5), rand_c(1.0, 0.0), rand_c(0.5, 3.0)];
        for phi_t in [0.0, 0.5, PI / 2.0, PI] {
            for phi_r in [0.0, 1.0, PI] {
                let bs = BeamSplitter { theta: PI / 2.0, phi_t, phi_r };
                let rot = Complex64::from_polar(1.0, 2.0 * phi_t);
                for f in fs {
                    let (x, y) = port_amplitudes(a, f, 1e15, &bs, 0.0, PortB::Printed);
                    assert_relative_eq!(x.norm_sqr(), a.norm_sqr() * (f * rot - 1.0).norm_sqr() / 8.0, epsilon = 1e-14);
                    assert_relative_eq!(y.norm_sqr(), a.norm_sqr() * (f * rot + 1.0).norm_sqr() / 8.0, epsilon = 1e-14);
                    let (_, y) = port_amplitudes(a, f, 1e15, &bs, 0.0, PortB::Cascade);
                    assert_relative_eq!(y.norm_sqr(), a.norm_sqr() * (f * rot - 1.0).norm_sqr() / 8.0, epsilon = 1e-14);
                }
            }
        }
        // phi_t = 0: port A is |f - 1|^2 / 8 exactly as in the two-factor form.
        let (x, _) = port_amplitudes(a, fs[0], 1e15, &BeamSplitter::balanced(), 0.0, PortB::Printed);
        assert_relative_eq!(x.norm_sqr(), a.norm_sqr() * (fs[0] - 1.0).norm_sqr() / 8.0, epsilon = 1e-14);
    }

    #[test]
    fn joint_spectrum_is_outer_product_of_clicks() {
        let g = grid();
        let scene = Scene::mirror(1.0, 50e-6).unwrap();
        let setup = CoherentSetup::new(source(0.1), BeamSplitter::balanced());
        let (pa, pb) = setup.click_probabilities(&scene, &g).unwrap();
        let js = setup.joint_spectrum(&scene, &g).unwrap();
        for (i, a) in pa.iter().enumerate() {
            for (j, b) in pb.iter().enumerate() {
                assert_eq!(js.get(i, j), a * b);
            }
        }
        let f = mirror_transfer(&g, &MirrorObject::new(1.0, 50e-6).unwrap());
        let direct = coherent_joint_spectrum(&source(0.1), &f, &BeamSplitter::balanced(), 0.0).unwrap();
        for (x, y) in direct.values().iter().zip(js.values()) {
            assert_relative_eq!(*x, *y, max_relative = 1e-9, epsilon = 1e-300);
        }
    }

    #[test]
    fn photon_budget_matches_alpha() {
        let setup = CoherentSetup::new(source(0.1), BeamSplitter::balanced());
        assert_relative_eq!(setup.input_photons(), 1.0, max_relative = 1e-12);
        let g = grid();
        let u2 = setup.source.spectrum(&g).norm_sqr();
        let input: Vec<f64> = u2.iter().map(|v| v * 0.01).collect();
        let n: f64 = setup.photon_numbers(&g, &input).iter().sum();
        assert_relative_eq!(n, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn bin_integration_follows_dirichlet_kernel() {
        // Flat source, 50:50, tau = 0: |alpha_t|^2 = a^2 (1 + R^2 - 2 R cos(w z / c)) / 8.
        // Averaging cos over S uniform offsets scales the fringe by
        // sin(S x / 2) / (S sin(x / 2)), x = z w / (c S); sinc(z w / 2c) as S grows.
        use crate::spectral::SPEED_OF_LIGHT;
        let g = make_grid(1550.0 * NM, 100.0 * NM, 33).unwrap();
        let flat = CoherentSource::new(0.1, GaussianProfile { center_omega: g.center(), sigma_omega: 1e30 }, 1e8).unwrap();
        let z = 400e-6;
        let w = 2.0e12;
        let scene = Scene::mirror(1.0, z).unwrap();
        for s in [1usize, 4, 32, 256] {
            let setup = CoherentSetup { bin_width: Some(w), bin_subsamples: s, ..CoherentSetup::new(flat, BeamSplitter::balanced()) };
            let (ia, _) = setup.port_intensities(&scene, &g).unwrap();
            let x = z * w / (SPEED_OF_LIGHT * s as f64);
            let kernel = if s == 1 { 1.0 } else { (s as f64 * x / 2.0).sin() / (s as f64 * (x / 2.0).sin()) };
            for k in [0, 7, 16, 30] {
                let ph = g.omega_at(k) * z / SPEED_OF_LIGHT;
                let expected = 0.01 * (2.0 - 2.0 * kernel * ph.cos()) / 8.0;
                assert_relative_eq!(ia[k], expected, max_relative = 1e-9, epsilon = 1e-15);
            }
            if s == 256 {
                let y = z * w / (2.0 * SPEED_OF_LIGHT);
                assert_relative_eq!(kernel, y.sin() / y, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn jsa_normalisation_oracle() {
        let sigma = 1e13;
        for rho in [0.0, -0.5, 0.7, -0.9] {
            let src = BiphotonSource::new(sigma, 1.3 * sigma, rho, 1.2e15).unwrap();
            let g = SpectralGrid::new(1.2e15, 2.0 * 5.0 * 1.3 * sigma, 301).unwrap();
            let js = biphoton_jsa(&src, &g).unwrap();
            let integral = js.total() * g.spacing() * g.spacing();
            assert!((integral - 1.0).abs() < 1e-3, "rho {rho}: {integral}");
        }
    }

    #[test]
    fn jsa_anti_correlation_elongates_along_anti_diagonal() {
        let src = BiphotonSource::new(1e13, 1e13, -0.5, 1.2e15).unwrap();
        let g = SpectralGrid::new(1.2e15, 1e14, 101).unwrap();
        let js = biphoton_jsa(&src, &g).unwrap();
        let (mut sum_plus, mut sum_minus, mut norm) = (0.0, 0.0, 0.0);
        for i in 0..g.len() {
            for j in 0..g.len() {
                let (x, y) = (g.detuning_at(i), g.detuning_at(j));
                let p = js.get(i, j);
                sum_plus += p * (x + y).powi(2);
                sum_minus += p * (x - y).powi(2);
                norm += p;
            }
        }
        assert!(sum_plus / norm < sum_minus / norm);
    }

    #[test]
    fn constant_transfer_gives_zero_biphoton_signal() {
        let g = grid();
        let src = BiphotonSource::new(1e13, 1e13, -0.5, g.center()).unwrap();
        let jsa = biphoton_jsa(&src, &g).unwrap();
        let f = ComplexSpectrum::constant(g, rand_c(0.8, 2.1));
        let p = biphoton_joint_spectrum(&jsa, &f).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn biphoton_swap_symmetry() {
        let g = grid();
        let src = BiphotonSource::new(3e13, 3e13, -0.5, g.center()).unwrap();
        let jsa = biphoton_jsa(&src, &g).unwrap();
        let f = mirror_transfer(&g, &MirrorObject::new(1.0, 5e-6).unwrap());
        let p = biphoton_joint_spectrum(&jsa, &f).unwrap();
        let m = p.max();
        for i in 0..g.len() {
            for j in 0..g.len() {
                assert!((p.get(i, j) - p.get(j, i)).abs() <= 1e-12 * m);
            }
        }
    }

    #[test]
    fn biphoton_rejects_mismatched_grids() {
        let g = grid();
        let src = BiphotonSource::new(3e13, 3e13, -0.5, g.center()).unwrap();
        let jsa = biphoton_jsa(&src, &g).unwrap();
        let other = make_grid(1550.0 * NM, 600.0 * NM, 65).unwrap();
        let f = ComplexSpectrum::constant(other, Complex64::new(1.0, 0.0));
        assert!(biphoton_joint_spectrum(&jsa, &f).is_err());
        assert!(BiphotonSource::new(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(BiphotonSource::new(0.0, 1.0, 0.0, 1.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn splitter_is_unitary(theta in -10.0f64..10.0, pt in -10.0f64..10.0, pr in -10.0f64..10.0) {
            let u = bs_matrix(&BeamSplitter { theta, phi_t: pt, phi_r: pr });
            for i in 0..2 {
                for j in 0..2 {
                    let dot: Complex64 = (0..2).map(|k| u[k][i].conj() * u[k][j]).sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    proptest::prop_assert!((dot - target).norm() <= 1e-12);
                }
            }
        }

        #[test]
        fn port_energy_bound(
            theta in 0.0f64..PI, pt in -PI..PI, pr in -PI..PI,
            fr in 0.0f64..1.0, fp in -PI..PI, ar in 0.0f64..2.0, ap in -PI..PI,
            tau in -1e-12f64..1e-12, cascade in proptest::bool::ANY,
        ) {
            let bs = BeamSplitter { theta, phi_t: pt, phi_r: pr };
            let a = rand_c(ar, ap);
            let port = if cascade { PortB::Cascade } else { PortB::Printed };
            let (x, y) = port_amplitudes(a, rand_c(fr, fp), 1.2e15, &bs, tau, port);
            proptest::prop_assert!(x.norm_sqr() + y.norm_sqr() <= a.norm_sqr() * (1.0 + 1e-12));
        }

        #[test]
        fn brighter_source_raises_every_cell(scale in 1.01f64..5.0, z in 1e-6f64..200e-6) {
            let g = make_grid(1550.0 * NM, 600.0 * NM, 24).unwrap();
            let scene = Scene::mirror(0.8, z).unwrap();
            let lo = CoherentSetup::new(source(0.05), BeamSplitter::balanced()).joint_spectrum(&scene, &g).unwrap();
            let hi = CoherentSetup::new(source(0.05 * scale), BeamSplitter::balanced()).joint_spectrum(&scene, &g).unwrap();
            for (a, b) in lo.values().iter().zip(hi.values()) {
                proptest::prop_assert!(b >= a);
                if *a > 0.0 {
                    proptest::prop_assert!(b > a);
                }
            }
        }
    }
}
