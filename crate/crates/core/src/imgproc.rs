//! Single-channel float image plumbing shared by the tracking, flow and
//! stabilization stages.

/// Row-major single-channel float grid. Unlike [`crate::Frame`] the values
/// are unconstrained (gradients, polynomial coefficients, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height, "plane buffer size");
        Self { width, height, data }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Pixel access with replicated borders.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    /// Bilinear sample at a sub-pixel position; coordinates outside the
    /// grid are clamped to the border.
    #[inline]
    pub fn sample(&self, x: f32, y: f32) -> f32 {
        let maxx = (self.width - 1) as f32;
        let maxy = (self.height - 1) as f32;
        let x = x.clamp(0.0, maxx);
        let y = y.clamp(0.0, maxy);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let ax = x - x0 as f32;
        let ay = y - y0 as f32;
        let row0 = y0 * self.width;
        let row1 = y1 * self.width;
        let top = self.data[row0 + x0] * (1.0 - ax) + self.data[row0 + x1] * ax;
        let bottom = self.data[row1 + x0] * (1.0 - ax) + self.data[row1 + x1] * ax;
        top * (1.0 - ay) + bottom * ay
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean(&self) -> f32 {
        if self.data.is_empty() {
            return 0.0;
        }
        (self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64) as f32
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    /// Horizontal mirror.
    pub fn flip_horizontal(&self) -> Plane {
        Plane::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
    }
}

/// Normalized 1-D Gaussian taps, `2 * radius + 1` long.
pub fn gaussian_kernel(sigma: f32, radius: usize) -> Vec<f32> {
    let mut k: Vec<f32> = (0..=2 * radius)
        .map(|i| {
            let d = i as f32 - radius as f32;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable correlation with odd-length kernels and replicated borders.
pub fn convolve_separable(src: &Plane, kx: &[f32], ky: &[f32]) -> Plane {
    let (w, h) = src.dims();
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;
    let mut tmp = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &k) in kx.iter().enumerate() {
                acc += k * src.get_clamped(x as isize + i as isize - rx, y as isize);
            }
            tmp.set(x, y, acc);
        }
    }
    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &k) in ky.iter().enumerate() {
                acc += k * tmp.get_clamped(x as isize, y as isize + i as isize - ry);
            }
            out.set(x, y, acc);
        }
    }
    out
}

pub fn gaussian_blur(src: &Plane, sigma: f32) -> Plane {
    if sigma <= 0.0 {
        return src.clone();
    }
    let radius = ((3.0 * sigma).ceil() as usize).max(1);
    let k = gaussian_kernel(sigma, radius);
    convolve_separable(src, &k, &k)
}

/// Binomial 5-tap blur followed by 2x decimation.
pub fn pyr_down(src: &Plane) -> Plane {
    const K: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let blurred = convolve_separable(src, &K, &K);
    let w = src.width().div_ceil(2);
    let h = src.height().div_ceil(2);
    Plane::from_fn(w, h, |x, y| blurred.get(2 * x, 2 * y))
}

/// Gaussian pyramid, level 0 being the input. Stops early once a level
/// would fall below `min_size` on either side.
pub fn build_pyramid(src: &Plane, levels: usize, min_size: usize) -> Vec<Plane> {
    let mut pyr = vec![src.clone()];
    for _ in 1..levels {
        let last = pyr.last().unwrap();
        if last.width().div_ceil(2) < min_size || last.height().div_ceil(2) < min_size {
            break;
        }
        pyr.push(pyr_down(last));
    }
    pyr
}

/// Resample a sub-rectangle `(x0, y0, w, h)` of `src` onto an
/// `out_w x out_h` grid using pixel-center alignment and bilinear
/// interpolation.
pub fn crop_resize(src: &Plane, x0: f32, y0: f32, w: f32, h: f32, out_w: usize, out_h: usize) -> Plane {
    let sx = w / out_w as f32;
    let sy = h / out_h as f32;
    Plane::from_fn(out_w, out_h, |x, y| {
        let px = x0 + (x as f32 + 0.5) * sx - 0.5;
        let py = y0 + (y as f32 + 0.5) * sy - 0.5;
        src.sample(px, py)
    })
}

pub fn resize(src: &Plane, out_w: usize, out_h: usize) -> Plane {
    crop_resize(src, 0.0, 0.0, src.width() as f32, src.height() as f32, out_w, out_h)
}

/// 3x3 Sobel derivatives (unnormalized, scale 8).
pub fn sobel(src: &Plane) -> (Plane, Plane) {
    let (w, h) = src.dims();
    let mut gx = Plane::zeros(w, h);
    let mut gy = Plane::zeros(w, h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| src.get_clamped(x + dx, y + dy);
            let dx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let dy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            gx.set(x as usize, y as usize, dx);
            gy.set(x as usize, y as usize, dy);
        }
    }
    (gx, gy)
}

/// Scharr derivatives normalized to intensity units per pixel.
pub fn scharr(src: &Plane) -> (Plane, Plane) {
    let (w, h) = src.dims();
    let mut gx = Plane::zeros(w, h);
    let mut gy = Plane::zeros(w, h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| src.get_clamped(x + dx, y + dy);
            let dx = 3.0 * (p(1, -1) - p(-1, -1)) + 10.0 * (p(1, 0) - p(-1, 0)) + 3.0 * (p(1, 1) - p(-1, 1));
            let dy = 3.0 * (p(-1, 1) - p(-1, -1)) + 10.0 * (p(0, 1) - p(0, -1)) + 3.0 * (p(1, 1) - p(1, -1));
            gx.set(x as usize, y as usize, dx / 32.0);
            gy.set(x as usize, y as usize, dy / 32.0);
        }
    }
    (gx, gy)
}

/// Sum over a `(2r+1)^2` box with replicated borders.
pub fn box_sum(src: &Plane, r: usize) -> Plane {
    let k = vec![1.0; 2 * r + 1];
    convolve_separable(src, &k, &k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_hits_grid_values_exactly() {
        let p = Plane::from_fn(5, 4, |x, y| (x * 10 + y) as f32);
        for y in 0..4 {
            for x in 0..5 {
                assert_eq!(p.sample(x as f32, y as f32), p.get(x, y));
            }
        }
        assert!((p.sample(1.5, 2.0) - 17.0).abs() < 1e-6);
        assert_eq!(p.sample(-3.0, 0.0), p.get(0, 0));
    }

    #[test]
    fn gaussian_blur_preserves_constant() {
        let p = Plane::filled(9, 7, 0.25);
        let b = gaussian_blur(&p, 1.5);
        assert!(b.data().iter().all(|&v| (v - 0.25).abs() < 1e-6));
    }

    #[test]
    fn pyramid_halves_sizes() {
        let p = Plane::zeros(65, 40);
        let pyr = build_pyramid(&p, 3, 8);
        let dims: Vec<_> = pyr.iter().map(|l| l.dims()).collect();
        assert_eq!(dims, vec![(65, 40), (33, 20), (17, 10)]);
    }

    #[test]
    fn scharr_of_ramp_is_unit_slope() {
        let p = Plane::from_fn(10, 10, |x, _| x as f32 * 0.5);
        let (gx, gy) = scharr(&p);
        assert!((gx.get(5, 5) - 0.5).abs() < 1e-6);
        assert!(gy.get(5, 5).abs() < 1e-6);
    }

    #[test]
    fn identity_crop_resize() {
        let p = Plane::from_fn(8, 6, |x, y| (x + 2 * y) as f32);
        assert_eq!(resize(&p, 8, 6), p);
    }
}
