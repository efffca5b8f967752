/// Ordinary least-squares line `y = intercept + slope * x` with its Pearson
/// correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation; NaN when `y` is constant.
    pub r: f64,
}

impl LineFit {
    /// `None` for fewer than two points or constant `x`.
    pub fn new(x: &[f64], y: &[f64]) -> Option<Self> {
        assert_eq!(x.len(), y.len(), "regression inputs differ in length");
        let n = x.len();
        if n < 2 {
            return None;
        }
        let nf = n as f64;
        let mx = x.iter().sum::<f64>() / nf;
        let my = y.iter().sum::<f64>() / nf;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(y) {
            let (dx, dy) = (xi - mx, yi - my);
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        if sxx <= 0.0 {
            return None;
        }
        let slope = sxy / sxx;
        let r = if syy > 0.0 {
            sxy / (sxx * syy).sqrt()
        } else {
            f64::NAN
        };
        Some(Self {
            slope,
            intercept: my - slope * mx,
            r,
        })
    }

    /// Coefficient of determination. A perfect fit to constant `y` counts as 1.
    pub fn r2(&self) -> f64 {
        if self.r.is_nan() {
            1.0
        } else {
            self.r * self.r
        }
    }
}
