//! Synthetic trajectory clips: five motion classes rendered as a moving
//! disc over a fixed textured background. The sprite is identical across
//! classes, so only the trajectory carries label information.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clip::Clip;
use crate::error::{Error, Result};
use crate::rng::{clip_seed, Rng};

/// The five trajectory classes, codes 0..4 in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MotionType {
    Linear,
    Projectile,
    Oscillatory,
    Local,
    Random,
}

pub const ALL_MOTION_TYPES: [MotionType; 5] = [
    MotionType::Linear,
    MotionType::Projectile,
    MotionType::Oscillatory,
    MotionType::Local,
    MotionType::Random,
];

impl MotionType {
    pub fn code(self) -> u8 {
        match self {
            MotionType::Linear => 0,
            MotionType::Projectile => 1,
            MotionType::Oscillatory => 2,
            MotionType::Local => 3,
            MotionType::Random => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<MotionType> {
        ALL_MOTION_TYPES.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MotionType::Linear => "linear",
            MotionType::Projectile => "projectile",
            MotionType::Oscillatory => "oscillatory",
            MotionType::Local => "local",
            MotionType::Random => "random",
        }
    }

    pub fn from_name(name: &str) -> Option<MotionType> {
        ALL_MOTION_TYPES.iter().copied().find(|m| m.name() == name)
    }
}

impl core::fmt::Display for MotionType {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Trajectory shape parameters; which fields matter depends on the class.
#[derive(Debug, Clone)]
pub struct TrajectoryParams {
    /// Start position (x, y) in pixels.
    pub p0: (f64, f64),
    /// Velocity in pixels/frame.
    pub v0: (f64, f64),
    /// Gravity in pixels/frame^2 (projectile only).
    pub gravity: (f64, f64),
    /// Oscillation amplitude in pixels.
    pub amplitude: f64,
    /// Oscillation rate in radians/frame.
    pub angular_rate: f64,
    /// Local-motion jitter radius in pixels.
    pub jitter_radius: f64,
    /// Per-frame probability of resampling the random-walk velocity.
    pub direction_change_prob: f64,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        TrajectoryParams {
            p0: (16.0, 16.0),
            v0: (0.5, 0.0),
            gravity: (0.0, 0.1),
            amplitude: 6.0,
            angular_rate: 0.5,
            jitter_radius: 2.0,
            direction_change_prob: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Background {
    Plain,
    TexturedNoise,
}

/// Generator configuration. Defaults produce the desk-scale corpus:
/// 300 clips per class at 32x32x30, which the default 2/3 : 1/6 : 1/6
/// split turns into 1000 train / 250 val / 250 test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub clips_per_class: usize,
    pub height: usize,
    pub width: usize,
    pub t_total: usize,
    pub sprite_radius: usize,
    pub background: Background,
    pub master_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            clips_per_class: 300,
            height: 32,
            width: 32,
            t_total: 30,
            sprite_radius: 2,
            background: Background::TexturedNoise,
            master_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sprite_radius * 2 >= self.height.min(self.width) {
            return Err(Error::Config(format!(
                "sprite radius {} too large for {}x{} frames",
                self.sprite_radius, self.height, self.width
            )));
        }
        if self.t_total < 2 {
            return Err(Error::Config("t_total must be >= 2".into()));
        }
        Ok(())
    }

    fn margin(&self) -> f64 {
        self.sprite_radius as f64
    }
}

fn clamp_pos(p: (f64, f64), cfg: &SynthConfig) -> (f64, f64) {
    let m = cfg.margin();
    (
        p.0.clamp(m, cfg.width as f64 - 1.0 - m),
        p.1.clamp(m, cfg.height as f64 - 1.0 - m),
    )
}

/// Positions for one clip. All positions are clamped so the sprite stays
/// inside the frame; the functional forms are evaluated before clamping.
pub fn gen_trajectory(
    class: MotionType,
    params: &TrajectoryParams,
    t_total: usize,
    cfg: &SynthConfig,
    rng: &mut Rng,
) -> Result<Vec<(f64, f64)>> {
    if t_total < 2 {
        return Err(Error::Config("trajectory needs t_total >= 2".into()));
    }
    let mut positions = Vec::with_capacity(t_total);
    match class {
        MotionType::Linear => {
            for t in 0..t_total {
                let ft = t as f64;
                let p = (params.p0.0 + params.v0.0 * ft, params.p0.1 + params.v0.1 * ft);
                positions.push(clamp_pos(p, cfg));
            }
        }
        MotionType::Projectile => {
            // closed-form parabola, restarted once if it reaches the
            // bottom margin: v_y reflects with damping 0.8
            let floor = cfg.height as f64 - 1.0 - cfg.margin();
            let (mut t0, mut p0, mut v0) = (0.0f64, params.p0, params.v0);
            let g = params.gravity;
            let mut bounced = false;
            for t in 0..t_total {
                let dt = t as f64 - t0;
                let x = p0.0 + v0.0 * dt + 0.5 * g.0 * dt * dt;
                let y = p0.1 + v0.1 * dt + 0.5 * g.1 * dt * dt;
                if !bounced && y >= floor && g.1 > 0.0 {
                    let vy = v0.1 + g.1 * dt;
                    t0 = t as f64;
                    p0 = (x, floor);
                    v0 = (v0.0, -0.8 * vy.abs());
                    bounced = true;
                    positions.push(clamp_pos((x, floor), cfg));
                } else {
                    positions.push(clamp_pos((x, y), cfg));
                }
            }
        }
        MotionType::Oscillatory => {
            let theta = rng.uniform(0.0, 2.0 * core::f64::consts::PI);
            let u = (libm::cos(theta), libm::sin(theta));
            for t in 0..t_total {
                let s = params.amplitude * libm::sin(params.angular_rate * t as f64);
                positions.push(clamp_pos((params.p0.0 + s * u.0, params.p0.1 + s * u.1), cfg));
            }
        }
        MotionType::Local => {
            let r = params.jitter_radius;
            for _ in 0..t_total {
                let jx = rng.uniform(-r, r);
                let jy = rng.uniform(-r, r);
                positions.push(clamp_pos((params.p0.0 + jx, params.p0.1 + jy), cfg));
            }
        }
        MotionType::Random => {
            let mut p = params.p0;
            let mut v = random_walk_velocity(rng);
            positions.push(clamp_pos(p, cfg));
            for _ in 1..t_total {
                if rng.chance(params.direction_change_prob) {
                    v = random_walk_velocity(rng);
                }
                p = (p.0 + v.0, p.1 + v.1);
                p = clamp_pos(p, cfg);
                positions.push(p);
            }
        }
    }
    Ok(positions)
}

fn random_walk_velocity(rng: &mut Rng) -> (f64, f64) {
    let speed = rng.uniform(1.0, 3.0);
    let theta = rng.uniform(0.0, 2.0 * core::f64::consts::PI);
    (speed * libm::cos(theta), speed * libm::sin(theta))
}

/// Texture intensity band. Kept well below the sprite's 255 so the
/// per-clip texture stays a mild nuisance for the classifier while
/// still giving the flow estimator gradients to latch onto.
pub const TEXTURE_LO: f64 = 8.0;
pub const TEXTURE_HI: f64 = 72.0;

/// Smooth value-noise texture: a coarse random grid bilinearly
/// upsampled.
fn noise_texture(h: usize, w: usize, rng: &mut Rng) -> Vec<u8> {
    const GRID: usize = 8;
    let mut coarse = [[0f32; GRID + 1]; GRID + 1];
    for row in coarse.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.uniform(TEXTURE_LO, TEXTURE_HI) as f32;
        }
    }
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        let fy = y as f32 * GRID as f32 / h as f32;
        let y0 = fy as usize;
        let wy = fy - y0 as f32;
        for x in 0..w {
            let fx = x as f32 * GRID as f32 / w as f32;
            let x0 = fx as usize;
            let wx = fx - x0 as f32;
            let top = coarse[y0][x0] * (1.0 - wx) + coarse[y0][x0 + 1] * wx;
            let bot = coarse[y0 + 1][x0] * (1.0 - wx) + coarse[y0 + 1][x0 + 1] * wx;
            out.push((top * (1.0 - wy) + bot * wy) as u8);
        }
    }
    out
}

/// Rasterize positions into a grayscale clip: fixed background plus a
/// filled disc of intensity 255 at each frame's position.
pub fn render_clip(
    positions: &[(f64, f64)],
    cfg: &SynthConfig,
    rng: &mut Rng,
    id: impl Into<String>,
) -> Result<Clip> {
    cfg.validate()?;
    let (h, w) = (cfg.height, cfg.width);
    let background = match cfg.background {
        Background::Plain => vec![128u8; h * w],
        Background::TexturedNoise => noise_texture(h, w, rng),
    };
    let r = cfg.sprite_radius as isize;
    let r2 = r * r;
    let mut frames = Vec::with_capacity(positions.len() * h * w);
    for &(x, y) in positions {
        let mut frame = background.clone();
        let cx = libm::round(x) as isize;
        let cy = libm::round(y) as isize;
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy <= r2 {
                    let (px, py) = (cx + dx, cy + dy);
                    if px >= 0 && (px as usize) < w && py >= 0 && (py as usize) < h {
                        frame[py as usize * w + px as usize] = 255;
                    }
                }
            }
        }
        frames.extend_from_slice(&frame);
    }
    Clip::new(frames, positions.len(), h, w, 1, None, id)
}

/// Sample per-class trajectory parameters. Ranges keep trajectories
/// mostly inside the frame and geometrically separable; start positions
/// are drawn so the full extent fits, which keeps the single-frame
/// position distribution similar across classes.
pub fn sample_params(class: MotionType, cfg: &SynthConfig, rng: &mut Rng) -> TrajectoryParams {
    let m = cfg.margin();
    let (wf, hf) = (cfg.width as f64 - 1.0, cfg.height as f64 - 1.0);
    let last = (cfg.t_total - 1) as f64;
    let mut p = TrajectoryParams::default();
    match class {
        MotionType::Linear => {
            // near-diagonal headings let a long straight run fit the
            // frame without clamping any endpoint
            let speed = rng.uniform(1.0, 1.08);
            let quadrant = rng.below(4) as f64;
            let theta = quadrant * core::f64::consts::FRAC_PI_2
                + core::f64::consts::FRAC_PI_4
                + rng.uniform(-0.25, 0.25);
            p.v0 = (speed * libm::cos(theta), speed * libm::sin(theta));
            let dx = p.v0.0 * last;
            let dy = p.v0.1 * last;
            p.p0 = (
                rng.uniform(m + (-dx).max(0.0), wf - m - dx.max(0.0)),
                rng.uniform(m + (-dy).max(0.0), hf - m - dy.max(0.0)),
            );
        }
        MotionType::Projectile => {
            // apex lands mid-clip so the fall dominates the second half;
            // gravity capped jointly with apex time to keep the arc in frame
            let apex = rng.uniform(9.5, 10.5);
            let g_cap = (hf - 2.0 * m - 1.0)
                / (last * last / 2.0 - apex * last + apex * apex / 2.0).max(1.0);
            let g = rng.uniform(0.11, g_cap.min(0.15));
            let vx = rng.uniform(0.08, 0.2) * if rng.chance(0.5) { 1.0 } else { -1.0 };
            p.v0 = (vx, -g * apex);
            p.gravity = (0.0, g);
            let rise = g * apex * apex / 2.0;
            let fall = g * (last * last / 2.0 - apex * last);
            let dx = vx * last;
            // start so the apex grazes the top margin: the arc sweeps
            // nearly the full frame height before the floor bounce
            let _ = fall;
            p.p0 = (
                rng.uniform(m + (-dx).max(0.0), wf - m - dx.max(0.0)),
                m + rise + rng.uniform(0.0, 2.0),
            );
        }
        MotionType::Oscillatory => {
            // period near 20 frames: wide swing that returns to its start
            p.amplitude = rng.uniform(5.5, 8.5);
            p.angular_rate = rng.uniform(0.30, 0.33);
            let a = p.amplitude;
            p.p0 = (
                rng.uniform(m + a, wf - m - a),
                rng.uniform(m + a, hf - m - a),
            );
        }
        MotionType::Local => {
            // jitter around the frame center: stays far from every edge
            p.jitter_radius = rng.uniform(0.7, 1.5);
            p.p0 = (
                wf / 2.0 + rng.uniform(-4.0, 4.0),
                hf / 2.0 + rng.uniform(-4.0, 4.0),
            );
        }
        MotionType::Random => {
            p.direction_change_prob = rng.uniform(0.6, 0.9);
            p.p0 = (
                wf / 2.0 + rng.uniform(-5.0, 5.0),
                hf / 2.0 + rng.uniform(-5.0, 5.0),
            );
        }
    }
    p
}

/// One fully synthesized labeled clip from a derived seed.
pub fn gen_clip(class: MotionType, cfg: &SynthConfig, index: usize) -> Result<Clip> {
    let seed = clip_seed(cfg.master_seed, class.code() as u64, index as u64);
    let mut rng = Rng::new(seed);
    let params = sample_params(class, cfg, &mut rng);
    let positions = gen_trajectory(class, &params, cfg.t_total, cfg, &mut rng)?;
    render_clip(
        &positions,
        cfg,
        &mut rng,
        format!("{}_{index:04}", class.name()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// One planned dataset entry: identity, label, and split assignment.
#[derive(Debug, Clone)]
pub struct PlannedClip {
    pub id: String,
    pub class: MotionType,
    pub index: usize,
    pub split: Split,
}

/// Deterministic dataset plan. Within each class, clips are ranked by a
/// hash of their id and the ranking is cut at the cumulative split
/// fractions, so split sizes are exact up to rounding.
pub fn dataset_plan(cfg: &SynthConfig, fractions: (f64, f64, f64)) -> Result<Vec<PlannedClip>> {
    cfg.validate()?;
    let (ft, fv, fs) = fractions;
    if ft <= 0.0 || fv < 0.0 || fs <= 0.0 || libm::fabs(ft + fv + fs - 1.0) > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions {fractions:?} must be non-negative and sum to 1"
        )));
    }
    let n = cfg.clips_per_class;
    let mut plan = Vec::with_capacity(n * ALL_MOTION_TYPES.len());
    for class in ALL_MOTION_TYPES {
        let mut order: Vec<usize> = (0..n).collect();
        let ranks: Vec<u64> = (0..n)
            .map(|i| {
                crate::rng::mix(
                    0x5117_75eed ^ cfg.master_seed,
                    hash_id(&format!("{}_{i:04}", class.name())),
                )
            })
            .collect();
        order.sort_by_key(|&i| (ranks[i], i));
        let n_train = libm::round(ft * n as f64) as usize;
        let n_val = libm::round(fv * n as f64) as usize;
        for (rank, &i) in order.iter().enumerate() {
            let split = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val.min(n - n_train) {
                Split::Val
            } else {
                Split::Test
            };
            plan.push(PlannedClip {
                id: format!("{}_{i:04}", class.name()),
                class,
                index: i,
                split,
            });
        }
    }
    plan.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(plan)
}

fn hash_id(id: &str) -> u64 {
    // FNV-1a
    let mut h = 0xcbf29ce484222325u64;
    for &b in id.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SynthConfig {
        SynthConfig::default()
    }

    #[test]
    fn motion_type_codes_stable() {
        assert_eq!(MotionType::Linear.code(), 0);
        assert_eq!(MotionType::Projectile.code(), 1);
        assert_eq!(MotionType::Oscillatory.code(), 2);
        assert_eq!(MotionType::Local.code(), 3);
        assert_eq!(MotionType::Random.code(), 4);
        for m in ALL_MOTION_TYPES {
            assert_eq!(MotionType::from_code(m.code()), Some(m));
            assert_eq!(MotionType::from_name(m.name()), Some(m));
        }
    }

    #[test]
    fn projectile_formula_point() {
        // p0=(2,28), v0=(1,-3), g=(0,0.5): p(2) = (4, 23)
        let params = TrajectoryParams {
            p0: (2.0, 28.0),
            v0: (1.0, -3.0),
            gravity: (0.0, 0.5),
            ..TrajectoryParams::default()
        };
        let mut rng = Rng::new(0);
        let pos = gen_trajectory(MotionType::Projectile, &params, 5, &cfg(), &mut rng).unwrap();
        assert!((pos[2].0 - 4.0).abs() < 1e-12);
        assert!((pos[2].1 - 23.0).abs() < 1e-12);
    }

    #[test]
    fn linear_x_strictly_increasing_until_clamped() {
        let params = TrajectoryParams {
            p0: (3.0, 16.0),
            v0: (1.0, 0.0),
            ..TrajectoryParams::default()
        };
        let mut rng = Rng::new(0);
        let pos = gen_trajectory(MotionType::Linear, &params, 30, &cfg(), &mut rng).unwrap();
        let limit = 29.0;
        for w in pos.windows(2) {
            if w[1].0 < limit {
                assert!(w[1].0 > w[0].0);
            }
        }
        assert_eq!(pos.last().unwrap().0, limit);
    }

    #[test]
    fn oscillatory_periodic() {
        let omega = core::f64::consts::PI / 5.0; // period 10 frames
        let params = TrajectoryParams {
            p0: (16.0, 16.0),
            amplitude: 5.0,
            angular_rate: omega,
            ..TrajectoryParams::default()
        };
        let mut rng = Rng::new(4);
        let pos = gen_trajectory(MotionType::Oscillatory, &params, 25, &cfg(), &mut rng).unwrap();
        for t in 0..15 {
            assert!((pos[t].0 - pos[t + 10].0).abs() < 1e-9);
            assert!((pos[t].1 - pos[t + 10].1).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_fits_line_projectile_constant_second_difference() {
        let c = cfg();
        let mut rng = Rng::new(9);
        let lin = TrajectoryParams {
            p0: (5.0, 5.0),
            v0: (0.6, 0.5),
            ..TrajectoryParams::default()
        };
        let pos = gen_trajectory(MotionType::Linear, &lin, 30, &c, &mut rng).unwrap();
        for (t, &(x, y)) in pos.iter().enumerate() {
            assert!((x - (5.0 + 0.6 * t as f64)).abs() < 1e-9);
            assert!((y - (5.0 + 0.5 * t as f64)).abs() < 1e-9);
        }
        // parabola that stays well inside the frame: second difference = g
        let proj = TrajectoryParams {
            p0: (4.0, 20.0),
            v0: (0.7, -0.9),
            gravity: (0.0, 0.1),
            ..TrajectoryParams::default()
        };
        let pos = gen_trajectory(MotionType::Projectile, &proj, 20, &c, &mut rng).unwrap();
        for t in 0..18 {
            let d2x = pos[t + 2].0 - 2.0 * pos[t + 1].0 + pos[t].0;
            let d2y = pos[t + 2].1 - 2.0 * pos[t + 1].1 + pos[t].1;
            assert!(d2x.abs() < 1e-9);
            assert!((d2y - 0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn positions_always_within_frame() {
        let c = cfg();
        for class in ALL_MOTION_TYPES {
            for i in 0..25 {
                let mut rng = Rng::new(clip_seed(3, class.code() as u64, i));
                let params = sample_params(class, &c, &mut rng);
                let pos = gen_trajectory(class, &params, c.t_total, &c, &mut rng).unwrap();
                for &(x, y) in &pos {
                    assert!(x >= 2.0 && x <= 29.0, "{class:?} x {x}");
                    assert!(y >= 2.0 && y <= 29.0, "{class:?} y {y}");
                }
            }
        }
    }

    #[test]
    fn render_static_positions_identical_frames() {
        let c = cfg();
        let mut rng = Rng::new(1);
        let clip = render_clip(&[(10.0, 12.0); 4], &c, &mut rng, "static").unwrap();
        let first = clip.frame(0).to_vec();
        for t in 1..4 {
            assert_eq!(clip.frame(t), &first[..]);
        }
    }

    #[test]
    fn disc_center_pixel_is_white() {
        let c = cfg();
        let mut rng = Rng::new(1);
        let clip = render_clip(&[(10.0, 12.0)], &c, &mut rng, "disc").unwrap();
        assert_eq!(clip.frame(0)[12 * 32 + 10], 255);
    }

    #[test]
    fn textured_background_constant_across_frames() {
        let c = cfg();
        let mut rng = Rng::new(2);
        // place the disc in two corners; background pixels far from both
        // must agree between frames
        let clip = render_clip(&[(4.0, 4.0), (27.0, 27.0)], &c, &mut rng, "bg").unwrap();
        let (f0, f1) = (clip.frame(0), clip.frame(1));
        assert_eq!(f0[16 * 32 + 28], f1[16 * 32 + 28]);
        assert_eq!(f0[28 * 32 + 4], f1[28 * 32 + 4]);
    }

    #[test]
    fn oversized_sprite_rejected() {
        let mut c = cfg();
        c.sprite_radius = 16;
        let mut rng = Rng::new(1);
        assert!(matches!(
            render_clip(&[(16.0, 16.0)], &c, &mut rng, "big"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn gen_clip_bitwise_reproducible() {
        let c = cfg();
        let a = gen_clip(MotionType::Random, &c, 7).unwrap();
        let b = gen_clip(MotionType::Random, &c, 7).unwrap();
        assert_eq!(a, b);
        let other = gen_clip(MotionType::Random, &c, 8).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn plan_counts_and_determinism() {
        let mut c = cfg();
        c.clips_per_class = 10;
        let plan = dataset_plan(&c, (0.7, 0.1, 0.2)).unwrap();
        assert_eq!(plan.len(), 50);
        for class in ALL_MOTION_TYPES {
            assert_eq!(plan.iter().filter(|p| p.class == class).count(), 10);
        }
        let again = dataset_plan(&c, (0.7, 0.1, 0.2)).unwrap();
        assert_eq!(plan.len(), again.len());
        for (a, b) in plan.iter().zip(&again) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.split, b.split);
        }
    }

    #[test]
    fn plan_split_sizes_near_fractions() {
        let mut c = cfg();
        c.clips_per_class = 100; // 500 clips
        let plan = dataset_plan(&c, (0.7, 0.1, 0.2)).unwrap();
        let count = |s: Split| plan.iter().filter(|p| p.split == s).count() as i64;
        assert!((count(Split::Train) - 350).abs() <= 2);
        assert!((count(Split::Val) - 50).abs() <= 2);
        assert!((count(Split::Test) - 100).abs() <= 2);
    }

    #[test]
    fn default_plan_is_1000_250_250() {
        let plan = dataset_plan(&cfg(), (2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0)).unwrap();
        let count = |s: Split| plan.iter().filter(|p| p.split == s).count();
        assert_eq!(count(Split::Train), 1000);
        assert_eq!(count(Split::Val), 250);
        assert_eq!(count(Split::Test), 250);
    }

    #[test]
    fn bad_fractions_rejected() {
        assert!(dataset_plan(&cfg(), (0.5, 0.2, 0.2)).is_err());
        assert!(dataset_plan(&cfg(), (0.0, 0.5, 0.5)).is_err());
    }
}
