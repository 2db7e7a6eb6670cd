//! Dense row-major containers for the handful of shapes the models use:
//! matrices (`Mat`), T×H×W volumes (`Vol`) and T×C×H×W feature maps
//! (`FeatureMap`).

use crate::elem::Elem;
use crate::error::{Error, Result};

/// Dense 2-D array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Elem> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Mat::from_vec",
                format!("{rows}x{cols} = {} elements", rows * cols),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> F {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut F {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Matrix product `self (m×k) · other (k×n)`.
    pub fn matmul(&self, other: &Mat<F>) -> Result<Mat<F>> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "Mat::matmul",
                format!("inner dims equal ({} vs {})", self.cols, other.rows),
                "mismatch",
            ));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let lhs_row = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &l) in lhs_row.iter().enumerate() {
                let rhs_row = other.row(k);
                for (o, &r) in out_row.iter_mut().zip(rhs_row.iter()) {
                    *o = *o + l * r;
                }
            }
        }
        Ok(out)
    }
}

/// Dense 3-D array of shape T×H×W, row-major. Used for spatial-temporal
/// attention masks and single-channel volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Vol<F> {
    t: usize,
    h: usize,
    w: usize,
    data: Vec<F>,
}

impl<F: Elem> Vol<F> {
    pub fn zeros(t: usize, h: usize, w: usize) -> Self {
        Vol {
            t,
            h,
            w,
            data: vec![F::zero(); t * h * w],
        }
    }

    pub fn from_vec(t: usize, h: usize, w: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != t * h * w {
            return Err(Error::shape(
                "Vol::from_vec",
                format!("{t}x{h}x{w} = {} elements", t * h * w),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Vol { t, h, w, data })
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.t
    }

    #[inline]
    pub fn h(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn w(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn at(&self, t: usize, y: usize, x: usize) -> F {
        debug_assert!(t < self.t && y < self.h && x < self.w);
        self.data[(t * self.h + y) * self.w + x]
    }

    #[inline]
    pub fn at_mut(&mut self, t: usize, y: usize, x: usize) -> &mut F {
        debug_assert!(t < self.t && y < self.h && x < self.w);
        &mut self.data[(t * self.h + y) * self.w + x]
    }

    /// The H×W plane for frame `t`, contiguous.
    #[inline]
    pub fn plane(&self, t: usize) -> &[F] {
        let n = self.h * self.w;
        &self.data[t * n..(t + 1) * n]
    }

    #[inline]
    pub fn plane_mut(&mut self, t: usize) -> &mut [F] {
        let n = self.h * self.w;
        &mut self.data[t * n..(t + 1) * n]
    }

    #[inline]
    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Dense clip feature map of shape T×C×H×W, row-major.
///
/// T is the number of frames, C the channel count, H×W the spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<F> {
    t: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<F>,
}

impl<F: Elem> FeatureMap<F> {
    pub fn zeros(t: usize, c: usize, h: usize, w: usize) -> Self {
        FeatureMap {
            t,
            c,
            h,
            w,
            data: vec![F::zero(); t * c * h * w],
        }
    }

    /// Build from a flat row-major vector, validating the element count,
    /// non-degenerate dimensions and finiteness.
    pub fn from_vec(t: usize, c: usize, h: usize, w: usize, data: Vec<F>) -> Result<Self> {
        if t == 0 || c == 0 || h == 0 || w == 0 {
            return Err(Error::Config(format!(
                "feature map dimensions must all be >= 1, got {t}x{c}x{h}x{w}"
            )));
        }
        if data.len() != t * c * h * w {
            return Err(Error::shape(
                "FeatureMap::from_vec",
                format!("{t}x{c}x{h}x{w} = {} elements", t * c * h * w),
                format!("{} elements", data.len()),
            ));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("FeatureMap::from_vec".into()));
        }
        Ok(FeatureMap { t, c, h, w, data })
    }

    pub fn from_fn(
        t: usize,
        c: usize,
        h: usize,
        w: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> F,
    ) -> Self {
        let mut data = Vec::with_capacity(t * c * h * w);
        for ti in 0..t {
            for ci in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f(ti, ci, y, x));
                    }
                }
            }
        }
        FeatureMap { t, c, h, w, data }
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.t
    }

    #[inline]
    pub fn c(&self) -> usize {
        self.c
    }

    #[inline]
    pub fn h(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn w(&self) -> usize {
        self.w
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.t, self.c, self.h, self.w)
    }

    #[inline]
    pub fn at(&self, t: usize, c: usize, y: usize, x: usize) -> F {
        debug_assert!(t < self.t && c < self.c && y < self.h && x < self.w);
        self.data[((t * self.c + c) * self.h + y) * self.w + x]
    }

    #[inline]
    pub fn at_mut(&mut self, t: usize, c: usize, y: usize, x: usize) -> &mut F {
        debug_assert!(t < self.t && c < self.c && y < self.h && x < self.w);
        &mut self.data[((t * self.c + c) * self.h + y) * self.w + x]
    }

    /// The contiguous H×W plane for frame `t`, channel `c`.
    #[inline]
    pub fn plane(&self, t: usize, c: usize) -> &[F] {
        let n = self.h * self.w;
        let base = (t * self.c + c) * n;
        &self.data[base..base + n]
    }

    #[inline]
    pub fn plane_mut(&mut self, t: usize, c: usize) -> &mut [F] {
        let n = self.h * self.w;
        let base = (t * self.c + c) * n;
        &mut self.data[base..base + n]
    }

    #[inline]
    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Reorder frames: output frame `i` is input frame `perm[i]`.
    pub fn permute_frames(&self, perm: &[usize]) -> Result<FeatureMap<F>> {
        if perm.len() != self.t {
            return Err(Error::shape(
                "FeatureMap::permute_frames",
                format!("{} frame indices", self.t),
                format!("{}", perm.len()),
            ));
        }
        let mut out = FeatureMap::zeros(self.t, self.c, self.h, self.w);
        let frame = self.c * self.h * self.w;
        for (dst, &src) in perm.iter().enumerate() {
            out.data[dst * frame..(dst + 1) * frame]
                .copy_from_slice(&self.data[src * frame..(src + 1) * frame]);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_map_rejects_bad_lengths() {
        assert!(FeatureMap::from_vec(2, 2, 2, 2, vec![0.0f64; 15]).is_err());
        assert!(FeatureMap::from_vec(0, 2, 2, 2, Vec::<f64>::new()).is_err());
        assert!(FeatureMap::from_vec(1, 1, 1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(FeatureMap::from_vec(1, 1, 1, 2, vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn indexing_is_row_major() {
        let fm = FeatureMap::from_fn(2, 3, 4, 5, |t, c, y, x| {
            (((t * 3 + c) * 4 + y) * 5 + x) as f64
        });
        assert_eq!(fm.at(1, 2, 3, 4), (fm.as_slice().len() - 1) as f64);
        assert_eq!(fm.plane(1, 2)[3 * 5 + 4], fm.at(1, 2, 3, 4));
    }

    #[test]
    fn matmul_small() {
        let a = Mat::from_vec(2, 3, vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Mat::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.as_slice(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn permute_frames_moves_whole_frames() {
        let fm = FeatureMap::from_fn(3, 2, 1, 1, |t, c, _, _| (t * 10 + c) as f64);
        let p = fm.permute_frames(&[2, 0, 1]).unwrap();
        assert_eq!(p.at(0, 0, 0, 0), 20.0);
        assert_eq!(p.at(1, 1, 0, 0), 1.0);
        assert_eq!(p.at(2, 0, 0, 0), 10.0);
    }
}
