//! Synthetic longitudinal "brain + tumor" slices with ground truth.
//!
//! The brain is a textured ellipse; the tumor is a hyperintense ellipse whose
//! area follows the growth model. As the tumor grows, its centre moves along
//! `growth_direction` by `directionality` times the increase of its major
//! semi-axis, so most of the new tissue appears on one side.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image2D};
use crate::mechanistic::{tumor_area, AreaSeries, GrowthParams};
use crate::seed::{child_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub semi_x: f64,
    pub semi_y: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        ((x - self.cx) / self.semi_x).powi(2) + ((y - self.cy) / self.semi_y).powi(2) <= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TumorSpec {
    /// Centre at the first observation, pixels.
    pub cx: f64,
    pub cy: f64,
    /// Unit vector (normalised on use).
    pub growth_direction: [f64; 2],
    /// `0` is a disk; the major axis lies along the growth direction.
    pub eccentricity: f64,
    #[serde(default = "default_directionality")]
    pub directionality: f64,
}

fn default_directionality() -> f64 {
    0.8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intensity {
    pub brain_mean: f64,
    pub tumor_mean: f64,
    pub noise_sigma: f64,
    /// Standard deviation of the smooth brain texture.
    #[serde(default = "default_texture")]
    pub texture_amplitude: f64,
    /// Gaussian blur applied before noise, pixels (partial-volume edges).
    #[serde(default = "default_edge_blur")]
    pub edge_blur: f64,
    /// Peak brightening of brain tissue just ahead of the tumor front.
    #[serde(default)]
    pub infiltration: f64,
    /// Decay length of that brightening away from the tumor, pixels.
    #[serde(default = "default_infiltration_width")]
    pub infiltration_width: f64,
}

fn default_infiltration_width() -> f64 {
    3.0
}

fn default_texture() -> f64 {
    0.03
}

fn default_edge_blur() -> f64 {
    0.7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub pixel_spacing: f64,
    pub brain: Ellipse,
    pub background_texture_seed: u64,
    pub tumor: TumorSpec,
    pub growth: GrowthParams,
    pub observation_times: Vec<f64>,
    pub intensity: Intensity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomFrame {
    pub time: f64,
    pub image: Image2D,
    pub mask: BinaryMask,
    /// Area requested from the growth model, mm².
    pub area_mm2: f64,
    /// Area of the rasterised mask, mm².
    pub mask_area_mm2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSeries {
    pub frames: Vec<PhantomFrame>,
    pub brain_mask: BinaryMask,
    pub pixel_spacing: f64,
}

impl PhantomSeries {
    pub fn brain_area_mm2(&self) -> f64 {
        self.brain_mask.count() as f64 * self.pixel_spacing * self.pixel_spacing
    }

    /// Mask-measured areas as a fit-ready series.
    pub fn area_series(&self, t_rt_start: f64) -> Result<AreaSeries> {
        AreaSeries::new(
            self.frames.iter().map(|f| f.time).collect(),
            self.frames.iter().map(|f| f.mask_area_mm2).collect(),
            t_rt_start,
            self.brain_area_mm2(),
        )
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || !self.pixel_spacing.is_finite() || self.pixel_spacing <= 0.0 {
            return Err(Error::InvalidSpec("canvas and spacing must be positive".into()));
        }
        if self.observation_times.is_empty()
            || self.observation_times.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidSpec("observation times must be nonempty and increasing".into()));
        }
        if self.intensity.tumor_mean <= self.intensity.brain_mean {
            return Err(Error::InvalidSpec("tumor must be brighter than brain".into()));
        }
        if !(0.0..1.0).contains(&self.tumor.eccentricity) {
            return Err(Error::InvalidSpec("eccentricity must lie in [0, 1)".into()));
        }
        let [dx, dy] = self.tumor.growth_direction;
        if (dx * dx + dy * dy).sqrt() < 1e-12 {
            return Err(Error::InvalidSpec("growth direction must be nonzero".into()));
        }
        if self.intensity.noise_sigma < 0.0
            || self.intensity.texture_amplitude < 0.0
            || self.intensity.infiltration < 0.0
        {
            return Err(Error::InvalidSpec("noise, texture and infiltration must be non-negative".into()));
        }
        self.growth.validate().map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    fn direction(&self) -> (f64, f64) {
        let [dx, dy] = self.tumor.growth_direction;
        let n = (dx * dx + dy * dy).sqrt();
        (dx / n, dy / n)
    }

    fn major_semi_axis(&self, area_px: f64) -> f64 {
        let ratio = (1.0 - self.tumor.eccentricity.powi(2)).sqrt();
        (area_px / (std::f64::consts::PI * ratio)).sqrt()
    }

    fn tumor_mask(&self, major: f64, centre: (f64, f64)) -> BinaryMask {
        let geom = TumorGeometry::new(self, major, centre);
        BinaryMask::from_fn(self.width, self.height, |x, y| geom.radius(x as f64, y as f64) <= 1.0)
    }

    /// Rasterises the tumor so that its pixel count is as close as possible to
    /// `area_px`, searching over the ellipse scale.
    fn fitted_tumor_mask(&self, area_px: f64, reference_major: f64) -> (BinaryMask, TumorGeometry) {
        let nominal = self.major_semi_axis(area_px);
        let centre = |major: f64| {
            let (ux, uy) = self.direction();
            let shift = self.tumor.directionality * (major - reference_major);
            (self.tumor.cx + shift * ux, self.tumor.cy + shift * uy)
        };
        let build = |major: f64| self.tumor_mask(major, centre(major));
        let (mut lo, mut hi) = (0.8 * nominal, 1.2 * nominal);
        let mut best = (build(nominal), nominal);
        let err = |m: &BinaryMask| (m.count() as f64 - area_px).abs();
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let m = build(mid);
            if err(&m) < err(&best.0) {
                best = (m.clone(), mid);
            }
            if (m.count() as f64) < area_px {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (mask, major) = best;
        (mask, TumorGeometry::new(self, major, centre(major)))
    }
}

#[derive(Debug, Clone, Copy)]
struct TumorGeometry {
    centre: (f64, f64),
    direction: (f64, f64),
    major: f64,
    minor: f64,
}

impl TumorGeometry {
    fn new(spec: &PhantomSpec, major: f64, centre: (f64, f64)) -> Self {
        let minor = major * (1.0 - spec.tumor.eccentricity.powi(2)).sqrt();
        Self { centre, direction: spec.direction(), major, minor }
    }

    /// Normalised elliptic radius; `1` on the tumor outline.
    fn radius(&self, x: f64, y: f64) -> f64 {
        let (px, py) = (x - self.centre.0, y - self.centre.1);
        let (ux, uy) = self.direction;
        let along = px * ux + py * uy;
        let across = -px * uy + py * ux;
        ((along / self.major).powi(2) + (across / self.minor).powi(2)).sqrt()
    }

    /// Brightening of tissue at `(x, y)`: decays with approximate distance
    /// from the outline and vanishes behind the tumor.
    fn infiltration(&self, x: f64, y: f64, peak: f64, width: f64) -> f64 {
        let r = self.radius(x, y);
        if peak == 0.0 || r <= 1.0 {
            return 0.0;
        }
        let (px, py) = (x - self.centre.0, y - self.centre.1);
        let norm = (px * px + py * py).sqrt().max(1e-12);
        let cos = (px * self.direction.0 + py * self.direction.1) / norm;
        let distance = (r - 1.0) * (self.major * self.minor).sqrt();
        peak * (-distance / width.max(1e-12)).exp() * (0.5 * (1.0 + cos)).powi(2)
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with clamped borders.
pub(crate) fn gaussian_blur(img: &Image2D, sigma: f64) -> Image2D {
    if sigma <= 0.0 {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let src = img.pixels();
    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            tmp[(y * w + x) as usize] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * src[(y * w + (x + i as isize - r).clamp(0, w - 1)) as usize])
                .sum();
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            out[(y * w + x) as usize] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * tmp[((y + i as isize - r).clamp(0, h - 1) * w + x) as usize])
                .sum();
        }
    }
    img.with_pixels(out).expect("same geometry")
}

fn normal_field(w: usize, h: usize, seed: u64) -> Image2D {
    let mut rng = rng_from_seed(seed);
    Image2D::from_fn(w, h, 1.0, |_, _| rng.sample(StandardNormal)).expect("finite noise")
}

/// Renders the phantom at every observation time. The anatomy (texture) is
/// fixed by `background_texture_seed`; acquisition noise by `seed`.
pub fn generate_phantom_series(spec: &PhantomSpec, seed: u64) -> Result<PhantomSeries> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let brain_mask = BinaryMask::from_fn(w, h, |x, y| spec.brain.contains(x as f64, y as f64));
    if brain_mask.is_empty() {
        return Err(Error::InvalidSpec("brain ellipse covers no pixels".into()));
    }
    let texture = {
        let raw = gaussian_blur(&normal_field(w, h, spec.background_texture_seed), 2.0);
        let n = raw.len() as f64;
        let mean = raw.pixels().iter().sum::<f64>() / n;
        let sd = (raw.pixels().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        raw.map(|v| (v - mean) / sd.max(1e-12) * spec.intensity.texture_amplitude)
    };
    let px_area = spec.pixel_spacing * spec.pixel_spacing;
    let first_area_px = tumor_area(spec.observation_times[0], &spec.growth) / px_area;
    let reference_major = spec.major_semi_axis(first_area_px);

    let mut frames = Vec::with_capacity(spec.observation_times.len());
    for (i, &t) in spec.observation_times.iter().enumerate() {
        let area_mm2 = tumor_area(t, &spec.growth);
        let (mask, geom) = spec.fitted_tumor_mask(area_mm2 / px_area, reference_major);
        if !brain_mask.is_superset_of(&mask) {
            return Err(Error::InvalidSpec(format!("tumor leaves the brain at t = {t}")));
        }
        let clean = Image2D::from_fn(w, h, spec.pixel_spacing, |x, y| {
            if mask.get(x, y) {
                spec.intensity.tumor_mean
            } else if brain_mask.get(x, y) {
                let halo = geom.infiltration(
                    x as f64,
                    y as f64,
                    spec.intensity.infiltration,
                    spec.intensity.infiltration_width,
                );
                spec.intensity.brain_mean + texture.get(x, y) + halo
            } else {
                0.0
            }
        })?;
        let blurred = gaussian_blur(&clean, spec.intensity.edge_blur);
        let noise = normal_field(w, h, child_seed(seed, i as u64));
        let image = blurred
            .zip_map(&noise, |v, n| (v + spec.intensity.noise_sigma * n).clamp(0.0, 1.0))?;
        frames.push(PhantomFrame {
            time: t,
            image,
            mask_area_mm2: mask.count() as f64 * px_area,
            mask,
            area_mm2,
        });
    }
    Ok(PhantomSeries { frames, brain_mask, pixel_spacing: spec.pixel_spacing })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub time_days: f64,
    pub image: String,
    pub mask: String,
    pub area_mm2: f64,
    pub mask_area_mm2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomManifest {
    pub pixel_spacing_mm: f64,
    pub brain_mask: String,
    pub brain_area_mm2: f64,
    pub series_csv: String,
    pub series_meta: String,
    pub frames: Vec<ManifestFrame>,
}

/// Writes images, masks, the area series and `manifest.json` into `dir`.
pub fn write_phantom_series(series: &PhantomSeries, t_rt_start: f64, dir: &Path) -> Result<PhantomManifest> {
    std::fs::create_dir_all(dir)?;
    let spacing = series.pixel_spacing;
    series.brain_mask.to_image(spacing)?.save(dir.join("brain.img"))?;
    let mut frames = Vec::new();
    for (i, f) in series.frames.iter().enumerate() {
        let (image, mask) = (format!("frame_{i:03}.img"), format!("mask_{i:03}.img"));
        f.image.save(dir.join(&image))?;
        f.mask.to_image(spacing)?.save(dir.join(&mask))?;
        frames.push(ManifestFrame {
            time_days: f.time,
            image,
            mask,
            area_mm2: f.area_mm2,
            mask_area_mm2: f.mask_area_mm2,
        });
    }
    series.area_series(t_rt_start)?.save(dir.join("areas.csv"), dir.join("areas.json"))?;
    let manifest = PhantomManifest {
        pixel_spacing_mm: spacing,
        brain_mask: "brain.img".into(),
        brain_area_mm2: series.brain_area_mm2(),
        series_csv: "areas.csv".into(),
        series_meta: "areas.json".into(),
        frames,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanistic::DecayForm;

    pub(crate) fn spec() -> PhantomSpec {
        PhantomSpec {
            width: 64,
            height: 64,
            pixel_spacing: 1.0,
            brain: Ellipse { cx: 32.0, cy: 32.0, semi_x: 28.0, semi_y: 24.0 },
            background_texture_seed: 4,
            tumor: TumorSpec {
                cx: 30.3,
                cy: 33.6,
                growth_direction: [1.0, 0.5],
                eccentricity: 0.5,
                directionality: 0.8,
            },
            growth: GrowthParams {
                a0: 110.0,
                lambda: 0.02,
                survival: 0.6,
                lambda_decay: 0.05,
                delta: 10.0,
                slope: 0.2,
                t_rt_start: 40.0,
                decay_form: DecayForm::Gated,
            },
            observation_times: vec![0.0, 25.0, 50.0],
            intensity: Intensity {
                brain_mean: 0.4,
                tumor_mean: 0.85,
                noise_sigma: 0.01,
                texture_amplitude: 0.03,
                edge_blur: 0.7,
                infiltration: 0.0,
                infiltration_width: 3.0,
            },
        }
    }

    #[test]
    fn mask_areas_track_the_growth_model() {
        let s = generate_phantom_series(&spec(), 1).unwrap();
        for f in &s.frames {
            let rel = (f.mask_area_mm2 - f.area_mm2).abs() / f.area_mm2;
            assert!(rel < 0.02, "t={} requested {} got {}", f.time, f.area_mm2, f.mask_area_mm2);
        }
    }

    #[test]
    fn no_growth_gives_identical_masks() {
        let mut sp = spec();
        sp.growth.lambda = 0.0;
        sp.growth.t_rt_start = 1000.0;
        let s = generate_phantom_series(&sp, 1).unwrap();
        assert!(s.frames.windows(2).all(|w| w[0].mask == w[1].mask));
    }

    #[test]
    fn growing_masks_are_nested() {
        let mut sp = spec();
        sp.growth.t_rt_start = 1000.0;
        let s = generate_phantom_series(&sp, 1).unwrap();
        for w in s.frames.windows(2) {
            assert!(w[1].mask.count() > w[0].mask.count());
            let kept = w[1].mask.intersection(&w[0].mask).unwrap().count();
            assert!(kept as f64 >= 0.97 * w[0].mask.count() as f64);
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let a = generate_phantom_series(&spec(), 9).unwrap();
        let b = generate_phantom_series(&spec(), 9).unwrap();
        assert_eq!(a, b);
        let c = generate_phantom_series(&spec(), 10).unwrap();
        assert_ne!(a.frames[0].image, c.frames[0].image);
        assert_eq!(a.frames[0].mask, c.frames[0].mask);
    }

    #[test]
    fn oversized_tumor_is_rejected() {
        let mut sp = spec();
        sp.growth.a0 = 1500.0;
        assert!(matches!(generate_phantom_series(&sp, 0), Err(Error::InvalidSpec(_))));
        let mut dim = spec();
        dim.intensity.tumor_mean = 0.3;
        assert!(matches!(generate_phantom_series(&dim, 0), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn manifest_lists_every_frame() {
        let dir = tempfile::tempdir().unwrap();
        let s = generate_phantom_series(&spec(), 2).unwrap();
        let m = write_phantom_series(&s, 40.0, dir.path()).unwrap();
        assert_eq!(m.frames.len(), 3);
        let back = Image2D::load(dir.path().join(&m.frames[1].mask)).unwrap();
        assert_eq!(BinaryMask::from_image(&back), s.frames[1].mask);
        let series = AreaSeries::load(dir.path().join("areas.csv"), dir.path().join("areas.json")).unwrap();
        assert_eq!(series.len(), 3);
    }
}
