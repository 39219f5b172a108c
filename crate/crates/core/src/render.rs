//! Static SVG rendering of level-`n` carpet cells and the slicing line.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};

use crate::carpet::{all_words, cell_rect, MoranSequence, Rect};
use crate::error::{Error, Result};
use crate::slicing::{line_cell_intersects, Intercept, Slope};

pub const DEFAULT_ELEMENT_CAP: usize = 20_000;
pub const DEFAULT_CANVAS: u32 = 600;

#[derive(Debug, Clone)]
pub struct RenderOptions {
    pub depth: usize,
    /// Side of the square canvas in pixels.
    pub canvas: u32,
    pub line: Option<(Slope, Intercept<BigInt>)>,
    pub element_cap: usize,
}

impl RenderOptions {
    pub fn new(depth: usize) -> Self {
        RenderOptions {
            depth,
            canvas: DEFAULT_CANVAS,
            line: None,
            element_cap: DEFAULT_ELEMENT_CAP,
        }
    }

    pub fn with_line(mut self, slope: Slope, a: Intercept<BigInt>) -> Self {
        self.line = Some((slope, a));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendering {
    pub svg: String,
    pub rects: usize,
    /// Cells whose closed square meets the line.
    pub hits: usize,
    pub lines: usize,
}

/// Portion of `y = (M/N) x + a` inside the closed unit square, as two exact
/// endpoints. `None` when the line only misses the square.
pub fn clip_line(slope: &Slope, a: &Ratio<BigInt>) -> Option<[(Ratio<BigInt>, Ratio<BigInt>); 2]> {
    let zero = Ratio::<BigInt>::zero();
    let one = Ratio::<BigInt>::one();
    let t = slope.tan::<BigInt>();
    let (x0, x1) = if t.is_zero() {
        if *a < zero || *a > one {
            return None;
        }
        (zero, one)
    } else {
        let lo = (-a.clone() / t.clone()).max(zero);
        let hi = ((one.clone() - a) / t.clone()).min(one);
        if lo > hi {
            return None;
        }
        (lo, hi)
    };
    let y = |x: &Ratio<BigInt>| t.clone() * x.clone() + a.clone();
    Some([(x0.clone(), y(&x0)), (x1.clone(), y(&x1))])
}

fn px(v: &Ratio<BigInt>, canvas: u32) -> f64 {
    (v * BigInt::from(canvas)).to_f64().unwrap_or(f64::NAN)
}

fn rect_element(r: &Rect<BigInt>, canvas: u32, hit: bool) -> String {
    let x = px(&r.x_lo, canvas);
    let y = px(&(Ratio::one() - r.y_hi.clone()), canvas);
    let s = px(&r.side(), canvas);
    let class = if hit { "hit" } else { "cell" };
    format!("<rect class=\"{class}\" x=\"{x:.4}\" y=\"{y:.4}\" width=\"{s:.4}\" height=\"{s:.4}\"/>\n")
}

/// Draws every level-`depth` cell, in lexicographic word order, then the
/// line if one is configured. Output depends only on the options.
pub fn render_svg(sigma: &MoranSequence, opts: &RenderOptions) -> Result<Rendering> {
    let cells = sigma.cell_count(opts.depth);
    let elements = cells.clone() + usize::from(opts.line.is_some());
    if elements > opts.element_cap.into() {
        return Err(Error::ElementCapExceeded {
            needed: u128::try_from(elements).unwrap_or(u128::MAX),
            cap: opts.element_cap as u128,
        });
    }
    let c = opts.canvas;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{c}\" height=\"{c}\" viewBox=\"0 0 {c} {c}\">"
    );
    let _ = writeln!(
        svg,
        "<!-- unit square [0,1]^2 mapped to a {c}x{c} canvas; x to the right, y inverted (canvas y = {c}(1 - y)). sigma={sigma} depth={} -->",
        opts.depth
    );
    svg.push_str(
        "<style>.cell{fill:#444}.hit{fill:#d33}.slice{stroke:#06c;stroke-width:1;fill:none}</style>\n",
    );
    let _ = writeln!(svg, "<rect x=\"0\" y=\"0\" width=\"{c}\" height=\"{c}\" fill=\"#fff\"/>");
    let mut rects = 0;
    let mut hits = 0;
    for word in all_words(sigma, opts.depth) {
        let r = cell_rect::<BigInt>(&word, sigma)?;
        let hit = opts
            .line
            .as_ref()
            .is_some_and(|(slope, a)| line_cell_intersects(&r, slope, a.value()));
        hits += usize::from(hit);
        rects += 1;
        svg.push_str(&rect_element(&r, c, hit));
    }
    let mut lines = 0;
    if let Some((slope, a)) = &opts.line {
        if let Some([(x0, y0), (x1, y1)]) = clip_line(slope, a.value()) {
            let one = Ratio::<BigInt>::one();
            let _ = writeln!(
                svg,
                "<line class=\"slice\" x1=\"{:.4}\" y1=\"{:.4}\" x2=\"{:.4}\" y2=\"{:.4}\"/>",
                px(&x0, c),
                px(&(one.clone() - y0), c),
                px(&x1, c),
                px(&(one - y1), c)
            );
            lines = 1;
        }
    }
    svg.push_str("</svg>\n");
    Ok(Rendering {
        svg,
        rects,
        hits,
        lines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slicing::count_oracle;

    fn seq(s: &str) -> MoranSequence {
        s.parse().unwrap()
    }

    #[test]
    fn rectangle_counts() {
        let r = render_svg(&seq("(0)"), &RenderOptions::new(1)).unwrap();
        assert_eq!((r.rects, r.hits, r.lines), (8, 0, 0));
        assert_eq!(r.svg.matches("<rect class=").count(), 8);
        let r = render_svg(&seq("(01)"), &RenderOptions::new(2)).unwrap();
        assert_eq!(r.rects, 96);
        assert_eq!(r.svg.matches("<rect class=").count(), 96);
    }

    #[test]
    fn line_marks_three_cells() {
        let slope: Slope = "1/1".parse().unwrap();
        let a = Intercept::parse("1/2", &slope).unwrap();
        let r = render_svg(&seq("(0)"), &RenderOptions::new(1).with_line(slope, a)).unwrap();
        assert_eq!((r.rects, r.hits, r.lines), (8, 3, 1));
        assert_eq!(r.svg.matches("class=\"hit\"").count(), 3);
        assert!(r.svg.contains("x1=\"0.0000\" y1=\"300.0000\" x2=\"300.0000\" y2=\"0.0000\""));
    }

    #[test]
    fn hits_match_oracle() {
        let sigma = seq("1(01)");
        for (s, a) in [("2/3", "1/7"), ("0/1", "2/5"), ("3/2", "-1/3")] {
            let slope: Slope = s.parse().unwrap();
            let a = Intercept::parse(a, &slope).unwrap();
            let expect = count_oracle(&a, &sigma, &slope, 3);
            let r = render_svg(&sigma, &RenderOptions::new(3).with_line(slope, a)).unwrap();
            assert_eq!(num_bigint::BigUint::from(r.hits), expect);
        }
    }

    #[test]
    fn deterministic_and_capped() {
        let slope: Slope = "1/2".parse().unwrap();
        let a = Intercept::parse("1/3", &slope).unwrap();
        let opts = RenderOptions::new(3).with_line(slope, a);
        let x = render_svg(&seq("(01)"), &opts).unwrap();
        let y = render_svg(&seq("(01)"), &opts).unwrap();
        assert_eq!(x, y);
        let err = render_svg(&seq("(1)"), &RenderOptions::new(4)).unwrap_err();
        assert!(matches!(err, Error::ElementCapExceeded { .. }));
    }

    #[test]
    fn clipping() {
        let steep: Slope = "3/1".parse().unwrap();
        let [(x0, y0), (x1, y1)] = clip_line(&steep, &Ratio::new((-1).into(), 2.into())).unwrap();
        assert_eq!((x0, y0), (Ratio::new(1.into(), 6.into()), Ratio::zero()));
        assert_eq!((x1, y1), (Ratio::new(1.into(), 2.into()), Ratio::one()));
    }
}
