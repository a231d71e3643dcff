//! Loop kernels for stride-1, zero-padded cross-correlation.
//!
//! Layouts: input `N×C×H×W`, dense kernels `C_in×C_out×K_x×K_y`, depthwise
//! kernels `C×1×K_x×K_y`. `K_x` runs along H and `K_y` along W. Kernels are
//! not flipped.

#[derive(Clone, Copy, Debug)]
pub(crate) struct Geometry {
    pub n: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub kx: usize,
    pub ky: usize,
    pub pad: usize,
}

impl Geometry {
    pub fn out_h(&self) -> usize {
        self.h + 2 * self.pad + 1 - self.kx
    }

    pub fn out_w(&self) -> usize {
        self.w + 2 * self.pad + 1 - self.ky
    }

    /// Output rows `i` for which input row `i + a - pad` exists.
    fn rows(&self, a: usize) -> std::ops::Range<usize> {
        let lo = self.pad.saturating_sub(a);
        let hi = self.out_h().min((self.h + self.pad).saturating_sub(a));
        lo..hi.max(lo)
    }

    fn cols(&self, b: usize) -> std::ops::Range<usize> {
        let lo = self.pad.saturating_sub(b);
        let hi = self.out_w().min((self.w + self.pad).saturating_sub(b));
        lo..hi.max(lo)
    }
}

/// Visits every (output row slice, input row slice, kernel tap) triple that a
/// single input/output plane pair shares. `f(out_offset, in_offset, len, a, b)`.
fn for_each_tap(g: &Geometry, mut f: impl FnMut(usize, usize, usize, usize, usize)) {
    let wo = g.out_w();
    for a in 0..g.kx {
        let rows = g.rows(a);
        for b in 0..g.ky {
            let cols = g.cols(b);
            if cols.is_empty() {
                continue;
            }
            let len = cols.end - cols.start;
            for i in rows.clone() {
                let r = i + a - g.pad;
                f(
                    i * wo + cols.start,
                    r * g.w + cols.start + b - g.pad,
                    len,
                    a,
                    b,
                );
            }
        }
    }
}

pub(crate) fn conv2d_forward(input: &[f64], kernel: &[f64], g: &Geometry) -> Vec<f64> {
    let (hw, ohw) = (g.h * g.w, g.out_h() * g.out_w());
    let mut out = vec![0.0; g.n * g.c_out * ohw];
    for n in 0..g.n {
        for c in 0..g.c_in {
            let plane = &input[(n * g.c_in + c) * hw..][..hw];
            for o in 0..g.c_out {
                let dst = &mut out[(n * g.c_out + o) * ohw..][..ohw];
                let taps = &kernel[(c * g.c_out + o) * g.kx * g.ky..][..g.kx * g.ky];
                for_each_tap(g, |oo, io, len, a, b| {
                    let k = taps[a * g.ky + b];
                    for (y, x) in dst[oo..oo + len].iter_mut().zip(&plane[io..io + len]) {
                        *y += k * x;
                    }
                });
            }
        }
    }
    out
}

pub(crate) fn conv2d_grad_input(grad_out: &[f64], kernel: &[f64], g: &Geometry) -> Vec<f64> {
    let (hw, ohw) = (g.h * g.w, g.out_h() * g.out_w());
    let mut grad = vec![0.0; g.n * g.c_in * hw];
    for n in 0..g.n {
        for c in 0..g.c_in {
            let dst = &mut grad[(n * g.c_in + c) * hw..][..hw];
            for o in 0..g.c_out {
                let src = &grad_out[(n * g.c_out + o) * ohw..][..ohw];
                let taps = &kernel[(c * g.c_out + o) * g.kx * g.ky..][..g.kx * g.ky];
                for_each_tap(g, |oo, io, len, a, b| {
                    let k = taps[a * g.ky + b];
                    for (x, y) in dst[io..io + len].iter_mut().zip(&src[oo..oo + len]) {
                        *x += k * y;
                    }
                });
            }
        }
    }
    grad
}

pub(crate) fn conv2d_grad_kernel(grad_out: &[f64], input: &[f64], g: &Geometry) -> Vec<f64> {
    let (hw, ohw) = (g.h * g.w, g.out_h() * g.out_w());
    let mut grad = vec![0.0; g.c_in * g.c_out * g.kx * g.ky];
    for n in 0..g.n {
        for c in 0..g.c_in {
            let plane = &input[(n * g.c_in + c) * hw..][..hw];
            for o in 0..g.c_out {
                let src = &grad_out[(n * g.c_out + o) * ohw..][..ohw];
                let taps = &mut grad[(c * g.c_out + o) * g.kx * g.ky..][..g.kx * g.ky];
                for_each_tap(g, |oo, io, len, a, b| {
                    let dot: f64 = src[oo..oo + len]
                        .iter()
                        .zip(&plane[io..io + len])
                        .map(|(y, x)| y * x)
                        .sum();
                    taps[a * g.ky + b] += dot;
                });
            }
        }
    }
    grad
}

pub(crate) fn depthwise_forward(input: &[f64], kernel: &[f64], g: &Geometry) -> Vec<f64> {
    let (hw, ohw, kk) = (g.h * g.w, g.out_h() * g.out_w(), g.kx * g.ky);
    let mut out = vec![0.0; g.n * g.c_in * ohw];
    for n in 0..g.n {
        for c in 0..g.c_in {
            let plane = &input[(n * g.c_in + c) * hw..][..hw];
            let dst = &mut out[(n * g.c_in + c) * ohw..][..ohw];
            let taps = &kernel[c * kk..][..kk];
            for_each_tap(g, |oo, io, len, a, b| {
                let k = taps[a * g.ky + b];
                for (y, x) in dst[oo..oo + len].iter_mut().zip(&plane[io..io + len]) {
                    *y += k * x;
                }
            });
        }
    }
    out
}

pub(crate) fn depthwise_grad_input(grad_out: &[f64], kernel: &[f64], g: &Geometry) -> Vec<f64> {
    let (hw, ohw, kk) = (g.h * g.w, g.out_h() * g.out_w(), g.kx * g.ky);
    let mut grad = vec![0.0; g.n * g.c_in * hw];
    for n in 0..g.n {
        for c in 0..g.c_in {
            let dst = &mut grad[(n * g.c_in + c) * hw..][..hw];
            let src = &grad_out[(n * g.c_in + c) * ohw..][..ohw];
            let taps = &kernel[c * kk..][..kk];
            for_each_tap(g, |oo, io, len, a, b| {
                let k = taps[a * g.ky + b];
                for (x, y) in dst[io..io + len].iter_mut().zip(&src[oo..oo + len]) {
                    *x += k * y;
                }
            });
        }
    }
    grad
}

pub(crate) fn depthwise_grad_kernel(grad_out: &[f64], input: &[f64], g: &Geometry) -> Vec<f64> {
    let (hw, ohw, kk) = (g.h * g.w, g.out_h() * g.out_w(), g.kx * g.ky);
    let mut grad = vec![0.0; g.c_in * kk];
    for n in 0..g.n {
        for c in 0..g.c_in {
            let plane = &input[(n * g.c_in + c) * hw..][..hw];
            let src = &grad_out[(n * g.c_in + c) * ohw..][..ohw];
            let taps = &mut grad[c * kk..][..kk];
            for_each_tap(g, |oo, io, len, a, b| {
                let dot: f64 = src[oo..oo + len]
                    .iter()
                    .zip(&plane[io..io + len])
                    .map(|(y, x)| y * x)
                    .sum();
                taps[a * g.ky + b] += dot;
            });
        }
    }
    grad
}
