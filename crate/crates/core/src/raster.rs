//! Row-major rasters and rectangular regions.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Half-open rectangle `[x0, x1) x [y0, y1)` in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Rect::new(0, 0, width, height)
    }

    pub fn width(&self) -> usize {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> usize {
        self.y1.saturating_sub(self.y0)
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn fits_within(&self, width: usize, height: usize) -> bool {
        self.x0 <= self.x1 && self.y0 <= self.y1 && self.x1 <= width && self.y1 <= height
    }

    /// `[x0, y0, x1, y1]`, the manifest encoding.
    pub fn to_array(self) -> [usize; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }

    pub fn from_array(a: [usize; 4]) -> Self {
        Rect::new(a[0], a[1], a[2], a[3])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Raster { width, height, data: vec![value; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, got: data.len() });
        }
        Ok(Raster { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Raster { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Raster<U> {
        Raster { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Pixels inside `region`, row by row.
    pub fn region(&self, region: Rect) -> impl Iterator<Item = T> + '_ {
        (region.y0..region.y1)
            .flat_map(move |y| self.data[y * self.width + region.x0..y * self.width + region.x1].iter().copied())
    }

    /// Circular shift: the output at `(x, y)` is the input at `(x - dx, y - dy)`.
    pub fn roll(&self, dx: usize, dy: usize) -> Self {
        let (w, h) = (self.width, self.height);
        Raster::from_fn(w, h, |x, y| self.get((x + w - dx % w) % w, (y + h - dy % h) % h))
    }

    /// Rotation by 90 degrees counter-clockwise; swaps width and height.
    pub fn rot90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        Raster::from_fn(h, w, |x, y| self.get(w - 1 - y, x))
    }
}
