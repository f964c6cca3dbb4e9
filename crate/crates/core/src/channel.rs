//! Lambertian line-of-sight channel for a ceiling LED array and a horizontal receiver array.
//!
//! Transmit antennas sit at the ceiling around a reference point `T_0`, receive antennas sit on
//! the floor plane around a reference point `R_0` whose polar coordinates `(r, theta)` are drawn
//! uniformly from `[0, r_e] x [0, 2 pi)`. Both planes are horizontal, so the emission and incidence
//! angles coincide and the gain depends only on the planar distance between the two antennas.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Lambertian order `m = -1 / log2(cos(phi_half))`.
pub fn lambertian_order(phi_half: f64) -> Result<f64> {
    if !(phi_half > 0.0 && phi_half < PI / 2.0) {
        return Err(invalid(format!("semi-angle {phi_half} rad must lie in (0, pi/2)")));
    }
    Ok(-1.0 / phi_half.cos().log2())
}

/// Optical front-end parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpticalParams {
    /// LED semi-angle at half power (rad).
    pub phi_half: f64,
    /// Photodetector area (m^2).
    pub area: f64,
    /// Photodetector responsivity (A/W).
    pub responsivity: f64,
    /// Optical filter gain.
    pub filter_gain: f64,
    /// Refractive index of the concentrator.
    pub refractive_index: f64,
    /// Receiver field of view (rad).
    pub psi_fov: f64,
}

impl OpticalParams {
    /// 60 degree semi-angle and field of view, 1 cm^2 detector, 0.4 A/W, unit filter gain,
    /// concentrator index 1.5.
    pub fn reference() -> Self {
        Self {
            phi_half: 60f64.to_radians(),
            area: 1e-4,
            responsivity: 0.4,
            filter_gain: 1.0,
            refractive_index: 1.5,
            psi_fov: 60f64.to_radians(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.phi_half,
            self.area,
            self.responsivity,
            self.filter_gain,
            self.refractive_index,
            self.psi_fov,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("optical parameters must be finite and positive"));
        }
        if self.phi_half >= PI / 2.0 || self.psi_fov > PI / 2.0 {
            return Err(invalid("semi-angle must be below pi/2 and field of view at most pi/2"));
        }
        Ok(())
    }

    pub fn lambertian_order(&self) -> f64 {
        -1.0 / self.phi_half.cos().log2()
    }
}

/// Concentrator gain: `eta^2 / sin(psi_fov)` inside the field of view, zero outside.
pub fn concentrator_gain(psi: f64, params: &OpticalParams) -> f64 {
    if (0.0..=params.psi_fov).contains(&psi) {
        params.refractive_index.powi(2) / params.psi_fov.sin()
    } else {
        0.0
    }
}

/// DC gain from distance and angles: `(m+1) A R_p / (2 pi d^2) cos^m(phi) T g(psi) cos(psi)`.
pub fn gain_from_angles(distance: f64, phi: f64, psi: f64, params: &OpticalParams) -> f64 {
    let m = params.lambertian_order();
    (m + 1.0) * params.area * params.responsivity / (2.0 * PI * distance * distance)
        * phi.cos().powf(m)
        * params.filter_gain
        * concentrator_gain(psi, params)
        * psi.cos()
}

/// Array layout and cell size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Vertical distance between the LED plane and the receiver plane (m).
    pub height: f64,
    /// Radius of the disc the receiver reference point moves in (m).
    pub cell_radius: f64,
    /// Distance of each ring transmitter from `T_0` (m).
    pub tx_ring_radius: f64,
    /// Distance of each ring receiver from `R_0` (m).
    pub rx_offset: f64,
    pub n_t: usize,
    pub n_r: usize,
}

impl Geometry {
    /// 2.15 m ceiling, 3.55 m cell, 1 m transmitter ring and 5 cm receiver spacing.
    pub fn reference(n_t: usize, n_r: usize) -> Self {
        Self { height: 2.15, cell_radius: 3.55, tx_ring_radius: 1.0, rx_offset: 0.05, n_t, n_r }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.height > 0.0 && self.cell_radius > 0.0) {
            return Err(invalid("height and cell radius must be positive"));
        }
        if !(self.tx_ring_radius >= 0.0 && self.rx_offset >= 0.0) {
            return Err(invalid("antenna spacings must be nonnegative"));
        }
        if self.n_t == 0 || self.n_r == 0 {
            return Err(invalid("antenna counts must be positive"));
        }
        Ok(())
    }

    pub fn tx_positions(&self) -> Vec<(f64, f64)> {
        array_layout(self.n_t, self.tx_ring_radius, (0.0, 0.0))
    }

    /// Receiver positions for a reference point at polar coordinates `(r, theta)`.
    pub fn rx_positions(&self, r: f64, theta: f64) -> Vec<(f64, f64)> {
        array_layout(self.n_r, self.rx_offset, (r * theta.cos(), r * theta.sin()))
    }
}

/// Antennas 1..4 at `(+s,0), (0,+s), (-s,0), (0,-s)` around the centre, antenna 5 on the centre.
/// Larger arrays put `n - 1` antennas evenly on the ring and the last one on the centre.
fn array_layout(n: usize, spacing: f64, (cx, cy): (f64, f64)) -> Vec<(f64, f64)> {
    let ring = if n <= 5 { 4 } else { n - 1 };
    (0..n)
        .map(|i| {
            if i == ring {
                (cx, cy)
            } else {
                let angle = 2.0 * PI * i as f64 / ring as f64;
                (cx + spacing * angle.cos(), cy + spacing * angle.sin())
            }
        })
        .collect()
}

/// Geometry, optics and whether gains beyond the field of view are cut to zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub geometry: Geometry,
    pub optics: OpticalParams,
    pub fov_cutoff: bool,
}

impl ChannelModel {
    pub fn new(geometry: Geometry, optics: OpticalParams, fov_cutoff: bool) -> Result<Self> {
        geometry.validate()?;
        optics.validate()?;
        Ok(Self { geometry, optics, fov_cutoff })
    }

    /// Reference geometry and optics with the field-of-view cutoff enabled.
    pub fn reference(n_t: usize, n_r: usize) -> Self {
        Self {
            geometry: Geometry::reference(n_t, n_r),
            optics: OpticalParams::reference(),
            fov_cutoff: true,
        }
    }

    /// `C (m+1) L^(m+1) / (r^2 + L^2)^((m+3)/2)` with `C = A R_p T g / (2 pi)`.
    pub fn gain_radial(&self, r: f64) -> f64 {
        let p = &self.optics;
        let l = self.geometry.height;
        let psi = (r / l).atan();
        if self.fov_cutoff && psi > p.psi_fov {
            return 0.0;
        }
        let g = p.refractive_index.powi(2) / p.psi_fov.sin();
        let c = p.area * p.responsivity * p.filter_gain * g / (2.0 * PI);
        let m = p.lambertian_order();
        c * (m + 1.0) * l.powf(m + 1.0) / (r * r + l * l).powf((m + 3.0) / 2.0)
    }

    /// Uniform `r` in `[0, r_e]` and uniform `theta` in `[0, 2 pi)`; not uniform over the disc.
    pub fn sample_rx_reference<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let r = rng.random::<f64>() * self.geometry.cell_radius;
        let theta = rng.random::<f64>() * 2.0 * PI;
        (r, theta)
    }

    /// Channel for a receiver reference point at polar coordinates `(r, theta)`.
    pub fn realization_at(&self, r: f64, theta: f64) -> ChannelRealization {
        let tx = self.geometry.tx_positions();
        let rx = self.geometry.rx_positions(r, theta);
        let gains = DMatrix::from_fn(rx.len(), tx.len(), |j, i| {
            let (dx, dy) = (rx[j].0 - tx[i].0, rx[j].1 - tx[i].1);
            self.gain_radial(dx.hypot(dy))
        });
        ChannelRealization { gains, rx_reference: (r, theta) }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let (r, theta) = self.sample_rx_reference(rng);
        self.realization_at(r, theta)
    }
}

/// One `n_r x n_t` gain matrix and the receiver placement that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub gains: DMatrix<f64>,
    pub rx_reference: (f64, f64),
}

impl ChannelRealization {
    pub fn from_gains(gains: DMatrix<f64>) -> Self {
        Self { gains, rx_reference: (0.0, 0.0) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn lambertian_orders() {
        assert!((lambertian_order(60f64.to_radians()).unwrap() - 1.0).abs() < 1e-12);
        assert!((lambertian_order(45f64.to_radians()).unwrap() - 2.0).abs() < 1e-12);
        // -1 / log2(sqrt(3)/2) = 1 / (1 - log2(3)/2)
        let expected = 1.0 / (1.0 - 3f64.log2() / 2.0);
        assert!((lambertian_order(30f64.to_radians()).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 4.8188).abs() < 1e-4);
        assert!(lambertian_order(0.0).is_err());
        assert!(lambertian_order(PI / 2.0).is_err());
    }

    #[test]
    fn concentrator() {
        let p = OpticalParams::reference();
        let inside = 2.25 / 60f64.to_radians().sin();
        assert!((concentrator_gain(0.0, &p) - inside).abs() < 1e-12);
        assert!((inside - 2.598_076).abs() < 1e-6);
        assert_eq!(concentrator_gain(p.psi_fov, &p), concentrator_gain(0.0, &p));
        assert_eq!(concentrator_gain(p.psi_fov + 1e-9, &p), 0.0);
    }

    #[test]
    fn gain_at_zero_offset() {
        let model = ChannelModel::reference(4, 1);
        let c = 1e-4 * 0.4 * (2.25 / 60f64.to_radians().sin()) / (2.0 * PI);
        let expected = 2.0 * c / (2.15f64 * 2.15);
        assert!((model.gain_radial(0.0) - expected).abs() < 1e-18);
        assert!((model.gain_radial(0.0) - 7.16e-6).abs() < 0.01e-6);
    }

    #[test]
    fn gain_cutoff_and_monotone() {
        let model = ChannelModel::reference(4, 1);
        let edge = 2.15 * 60f64.to_radians().tan();
        assert!(model.gain_radial(edge - 1e-9) > 0.0);
        assert_eq!(model.gain_radial(edge + 1e-9), 0.0);
        let uncut = ChannelModel { fov_cutoff: false, ..model };
        assert!(uncut.gain_radial(edge + 1e-9) > 0.0);
        assert!(uncut.gain_radial(1e6) < 1e-20);
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let g = model.gain_radial(i as f64 * edge / 200.0);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn radial_form_equals_angle_form() {
        let model = ChannelModel::reference(4, 1);
        let l = model.geometry.height;
        for i in 0..=100 {
            let r = 2.0 * l * i as f64 / 100.0;
            let d = r.hypot(l);
            let angle = (l / d).acos();
            let direct = gain_from_angles(d, angle, angle, &model.optics);
            let radial = model.gain_radial(r);
            if radial == 0.0 {
                assert_eq!(direct, 0.0);
            } else {
                assert!(((direct - radial) / radial).abs() < 1e-12, "r={r}");
            }
        }
    }

    #[test]
    fn layouts() {
        let g = Geometry::reference(5, 5);
        let tx = g.tx_positions();
        let expected = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (0.0, 0.0)];
        for (a, b) in tx.iter().zip(expected) {
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
        let rx = g.rx_positions(1.0, PI / 2.0);
        assert!((rx[0].0 - 0.05).abs() < 1e-12 && (rx[0].1 - 1.0).abs() < 1e-12);
        assert!((rx[4].0).abs() < 1e-12 && (rx[4].1 - 1.0).abs() < 1e-12);
        assert_eq!(Geometry::reference(8, 1).tx_positions().len(), 8);
    }

    #[test]
    fn centred_receiver() {
        let model = ChannelModel::reference(5, 5);
        let h = model.realization_at(0.0, 0.0).gains;
        assert!((h[(4, 4)] - model.gain_radial(0.0)).abs() < 1e-20);
        let ring = ChannelModel::reference(4, 1);
        let mut centred = ring;
        centred.geometry.rx_offset = 0.0;
        let h = centred.realization_at(0.0, 0.0).gains;
        for i in 1..4 {
            assert!((h[(0, i)] - h[(0, 0)]).abs() < 1e-20);
        }
    }

    #[test]
    fn sampling_is_reproducible_and_uniform() {
        let model = ChannelModel::reference(4, 4);
        let a = model.sample(&mut substream(3, 1, 0, 0));
        let b = model.sample(&mut substream(3, 1, 0, 0));
        assert_eq!(a, b);
        assert!(a.gains.iter().all(|g| g.is_finite() && *g >= 0.0));

        let mut rng = substream(11, 1, 0, 0);
        let n = 1_000_000;
        let bins = 20;
        let mut counts = vec![0usize; bins];
        let mut sum_r = 0.0;
        for _ in 0..n {
            let (r, theta) = model.sample_rx_reference(&mut rng);
            assert!((0.0..=3.55).contains(&r) && (0.0..2.0 * PI).contains(&theta));
            sum_r += r;
            counts[((theta / (2.0 * PI)) * bins as f64) as usize] += 1;
        }
        let mean = sum_r / n as f64;
        let sigma = 3.55 / 12f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 3.55 / 2.0).abs() < 3.0 * sigma);
        let expected = n as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99th percentile of chi-square with 19 degrees of freedom
        assert!(chi2 < 36.19, "chi2={chi2}");
    }
}
