//! Confusion-matrix metrics with void handling and boundary exclusion.

use std::fmt::Write as _;

use crate::dataset::{LabelMap, VOID};
use crate::{Error, Result};

/// Pixels to skip during evaluation, same layout as the label map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExclusionMask {
    width: usize,
    height: usize,
    excluded: Vec<bool>,
}

impl ExclusionMask {
    pub fn none(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            excluded: vec![false; width * height],
        }
    }

    #[inline]
    pub fn is_excluded(&self, row: usize, col: usize) -> bool {
        self.excluded[row * self.width + col]
    }

    pub fn excluded_count(&self) -> usize {
        self.excluded.iter().filter(|&&e| e).count()
    }
}

/// Excludes every pixel that has a pixel with a different (non-void) true
/// label within Euclidean distance `radius`.
pub fn boundary_exclusion_mask(truth: &LabelMap, radius: f64) -> ExclusionMask {
    let (w, h) = (truth.width(), truth.height());
    let mut mask = ExclusionMask::none(w, h);
    if radius < 1.0 {
        return mask;
    }
    let reach = radius.floor() as isize;
    let offsets: Vec<(isize, isize)> = (-reach..=reach)
        .flat_map(|di| (-reach..=reach).map(move |dj| (di, dj)))
        .filter(|&(di, dj)| (di, dj) != (0, 0) && ((di * di + dj * dj) as f64) <= radius * radius)
        .collect();
    for i in 0..h {
        for j in 0..w {
            let own = truth.get(i, j);
            if own == VOID {
                continue;
            }
            mask.excluded[i * w + j] = offsets.iter().any(|&(di, dj)| {
                let (y, x) = (i as isize + di, j as isize + dj);
                if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
                    return false;
                }
                let other = truth.get(y as usize, x as usize);
                other != VOID && other != own
            });
        }
    }
    mask
}

/// `K x K` counts, rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn record(&mut self, truth: usize, pred: usize) {
        self.counts[truth * self.classes + pred] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.get(k, k)).sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        (0..self.classes).map(|p| self.get(k, p)).sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, k)).sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.classes, other.classes);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// Counts pixels that are non-void in `truth` and not masked out.
pub fn confusion_matrix(
    pred: &LabelMap,
    truth: &LabelMap,
    mask: Option<&ExclusionMask>,
    classes: usize,
) -> Result<ConfusionMatrix> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(Error::mismatch(
            format!("{}x{}", truth.width(), truth.height()),
            format!("{}x{}", pred.width(), pred.height()),
        ));
    }
    if let Some(m) = mask {
        if m.width != truth.width() || m.height != truth.height() {
            return Err(Error::mismatch(
                format!("{}x{} mask", truth.width(), truth.height()),
                format!("{}x{} mask", m.width, m.height),
            ));
        }
    }
    let mut cm = ConfusionMatrix::new(classes);
    for (k, (&t, &p)) in truth.labels().iter().zip(pred.labels()).enumerate() {
        if t == VOID || mask.is_some_and(|m| m.excluded[k]) {
            continue;
        }
        let (t, p) = (t as usize, p as usize);
        if t >= classes || p >= classes {
            return Err(Error::Config(format!(
                "label {} outside {classes} classes at pixel {k}",
                t.max(p)
            )));
        }
        cm.record(t, p);
    }
    Ok(cm)
}

/// `trace / total`, `None` when nothing was evaluated.
pub fn pixel_accuracy(cm: &ConfusionMatrix) -> Option<f64> {
    let total = cm.total();
    (total > 0).then(|| cm.trace() as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Pixels of this class in the ground truth.
    pub support: u64,
    /// Whether the class occurs in truth or prediction.
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    pub per_class: Vec<ClassScore>,
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub mean_f1: Option<f64>,
}

/// Per-class precision, recall and F1. Ratios with a zero denominator are 0.
/// Classes absent from both truth and prediction do not enter the means.
pub fn class_scores(cm: &ConfusionMatrix) -> ClassScores {
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_class: Vec<ClassScore> = (0..cm.classes())
        .map(|k| {
            let tp = cm.get(k, k);
            let (row, col) = (cm.row_sum(k), cm.col_sum(k));
            let precision = ratio(tp, col);
            let recall = ratio(tp, row);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassScore {
                precision,
                recall,
                f1,
                support: row,
                present: row + col > 0,
            }
        })
        .collect();
    let mean = |f: fn(&ClassScore) -> f64| {
        let vals: Vec<f64> = per_class.iter().filter(|c| c.present).map(f).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    ClassScores {
        mean_precision: mean(|c| c.precision),
        mean_recall: mean(|c| c.recall),
        mean_f1: mean(|c| c.f1),
        per_class,
    }
}

/// Plain-text evaluation report: `key = value` lines followed by a per-class
/// table.
pub fn render_report(cm: &ConfusionMatrix, class_names: &[String], boundary_radius: f64) -> String {
    let scores = class_scores(cm);
    let fmt = |v: Option<f64>| v.map_or("no data".to_string(), |x| format!("{x:.6}"));
    let mut out = String::new();
    let _ = writeln!(out, "classes = {}", cm.classes());
    let _ = writeln!(out, "boundary_radius = {boundary_radius}");
    let _ = writeln!(out, "pixels_evaluated = {}", cm.total());
    let _ = writeln!(out, "pixel_accuracy = {}", fmt(pixel_accuracy(cm)));
    let _ = writeln!(out, "mean_precision = {}", fmt(scores.mean_precision));
    let _ = writeln!(out, "mean_recall = {}", fmt(scores.mean_recall));
    let _ = writeln!(out, "mean_f1 = {}", fmt(scores.mean_f1));
    let _ = writeln!(out);
    let _ = writeln!(out, "# class\tname\tsupport\tprecision\trecall\tf1");
    for (k, s) in scores.per_class.iter().enumerate() {
        let name = class_names.get(k).map_or("-", String::as_str);
        if s.present {
            let _ = writeln!(
                out,
                "{k}\t{name}\t{}\t{:.6}\t{:.6}\t{:.6}",
                s.support, s.precision, s.recall, s.f1
            );
        } else {
            let _ = writeln!(out, "{k}\t{name}\t0\tabsent\tabsent\tabsent");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: usize, rows: &[&[u8]]) -> LabelMap {
        LabelMap::new(w, rows.len(), rows.concat()).unwrap()
    }

    #[test]
    fn exclusion_uniform_and_zero_radius() {
        let uniform = LabelMap::filled(8, 8, 2);
        assert_eq!(boundary_exclusion_mask(&uniform, 3.0).excluded_count(), 0);
        let halves = LabelMap::from_fn(8, 8, |_, j| u8::from(j >= 4));
        assert_eq!(boundary_exclusion_mask(&halves, 0.0).excluded_count(), 0);
    }

    #[test]
    fn exclusion_vertical_edge_matches_brute_force() {
        let (w, h) = (20, 9);
        let halves = LabelMap::from_fn(w, h, |_, j| u8::from(j >= 10));
        let mask = boundary_exclusion_mask(&halves, 3.0);
        for i in 0..h {
            for j in 0..w {
                let mut brute = false;
                for y in 0..h {
                    for x in 0..w {
                        let d2 = (y as f64 - i as f64).powi(2) + (x as f64 - j as f64).powi(2);
                        if d2 <= 9.0 && halves.get(y, x) != halves.get(i, j) {
                            brute = true;
                        }
                    }
                }
                assert_eq!(mask.is_excluded(i, j), brute, "({i}, {j})");
            }
            // columns 7..=12 are within 3 of the edge
            for j in 0..w {
                assert_eq!(mask.is_excluded(i, j), (7..=12).contains(&j));
            }
        }
    }

    #[test]
    fn void_neighbours_are_ignored() {
        let m = LabelMap::from_fn(6, 1, |_, j| if j < 3 { 0 } else { VOID });
        assert_eq!(boundary_exclusion_mask(&m, 2.0).excluded_count(), 0);
    }

    #[test]
    fn hand_confusion() {
        let truth = map(4, &[&[0, 0, 1, 1], &[0, 0, 1, 1], &[2, 2, 1, 1], &[2, 2, 255, 255]]);
        let pred = map(4, &[&[0, 1, 1, 1], &[0, 0, 1, 0], &[2, 2, 1, 1], &[2, 0, 0, 0]]);
        let cm = confusion_matrix(&pred, &truth, None, 3).unwrap();
        // errors: (0,1) 0->1, (1,3) 1->0, (3,1) 2->0
        assert_eq!(cm.total(), 14);
        assert_eq!(cm.trace(), 11);
        assert_eq!(cm.get(0, 1), 1);
        assert_eq!(cm.get(1, 0), 1);
        assert_eq!(cm.get(2, 0), 1);
        assert!((pixel_accuracy(&cm).unwrap() - 11.0 / 14.0).abs() < 1e-12);

        let perfect = confusion_matrix(&truth, &truth, None, 3).unwrap();
        for t in 0..3 {
            for p in 0..3 {
                if t != p {
                    assert_eq!(perfect.get(t, p), 0);
                }
            }
        }
        assert_eq!(pixel_accuracy(&perfect), Some(1.0));
        let s = class_scores(&perfect);
        assert!(s.per_class.iter().all(|c| c.f1 == 1.0));

        let void = LabelMap::filled(4, 4, VOID);
        let empty = confusion_matrix(&pred, &void, None, 3).unwrap();
        assert_eq!(empty.total(), 0);
        assert_eq!(pixel_accuracy(&empty), None);

        assert!(confusion_matrix(&LabelMap::filled(3, 3, 0), &truth, None, 3).is_err());
    }

    #[test]
    fn all_wrong() {
        let truth = LabelMap::filled(3, 3, 0);
        let pred = LabelMap::filled(3, 3, 1);
        let cm = confusion_matrix(&pred, &truth, None, 2).unwrap();
        assert_eq!(pixel_accuracy(&cm), Some(0.0));
        let s = class_scores(&cm);
        assert_eq!(s.per_class[0].f1, 0.0);
        assert_eq!(s.per_class[1].f1, 0.0);
    }

    #[test]
    fn hand_two_class_scores() {
        // truth: 6 zeros, 4 ones. pred: zeros -> 5 right, 1 as one; ones -> 3 right, 1 as zero
        let mut cm = ConfusionMatrix::new(3);
        for _ in 0..5 {
            cm.record(0, 0);
        }
        cm.record(0, 1);
        for _ in 0..3 {
            cm.record(1, 1);
        }
        cm.record(1, 0);
        let s = class_scores(&cm);
        // class 0: P = 5/6, R = 5/6, F1 = 5/6; class 1: P = 3/4, R = 3/4
        assert!((s.per_class[0].precision - 5.0 / 6.0).abs() < 1e-12);
        assert!((s.per_class[0].recall - 5.0 / 6.0).abs() < 1e-12);
        assert!((s.per_class[1].f1 - 0.75).abs() < 1e-12);
        assert!(!s.per_class[2].present);
        assert!((s.mean_precision.unwrap() - (5.0 / 6.0 + 0.75) / 2.0).abs() < 1e-12);
        assert!((s.mean_f1.unwrap() - (5.0 / 6.0 + 0.75) / 2.0).abs() < 1e-12);

        // asymmetric case: truth 0 x4 predicted {0,0,0,1}, truth 1 x2 predicted {1,1}
        let mut cm = ConfusionMatrix::new(2);
        for p in [0, 0, 0, 1] {
            cm.record(0, p);
        }
        cm.record(1, 1);
        cm.record(1, 1);
        let s = class_scores(&cm);
        assert!((s.per_class[0].precision - 1.0).abs() < 1e-12);
        assert!((s.per_class[0].recall - 0.75).abs() < 1e-12);
        assert!((s.per_class[0].f1 - 6.0 / 7.0).abs() < 1e-12);
        assert!((s.per_class[1].precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.per_class[1].f1 - 0.8).abs() < 1e-12);
        assert!((s.mean_precision.unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert!((s.mean_recall.unwrap() - 0.875).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariance() {
        let truth = LabelMap::from_fn(7, 5, |i, j| ((i * 3 + j) % 3) as u8);
        let pred = LabelMap::from_fn(7, 5, |i, j| ((i + j * 2) % 3) as u8);
        let perm = [2u8, 0, 1];
        let permute = |m: &LabelMap| LabelMap::from_fn(7, 5, |i, j| perm[m.get(i, j) as usize]);
        let a = confusion_matrix(&pred, &truth, None, 3).unwrap();
        let b = confusion_matrix(&permute(&pred), &permute(&truth), None, 3).unwrap();
        assert_eq!(pixel_accuracy(&a), pixel_accuracy(&b));
        let (sa, sb) = (class_scores(&a), class_scores(&b));
        for (k, &p) in perm.iter().enumerate() {
            assert_eq!(sa.per_class[k], sb.per_class[p as usize]);
        }
        assert!((sa.mean_f1.unwrap() - sb.mean_f1.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn radius_monotone() {
        let truth = LabelMap::from_fn(16, 16, |i, j| ((i / 5 + j / 7) % 3) as u8);
        let mut prev = u64::MAX;
        for r in [0.0, 1.0, 1.5, 2.0, 3.0, 5.0] {
            let mask = boundary_exclusion_mask(&truth, r);
            let n = confusion_matrix(&truth, &truth, Some(&mask), 3).unwrap().total();
            assert!(n <= prev);
            prev = n;
        }
    }

    #[test]
    fn report_fields() {
        let mut cm = ConfusionMatrix::new(2);
        cm.record(0, 0);
        let text = render_report(&cm, &["a".into(), "b".into()], 3.0);
        assert!(text.contains("pixel_accuracy = 1.000000"));
        assert!(text.contains("1\tb\t0\tabsent"));
    }
}
