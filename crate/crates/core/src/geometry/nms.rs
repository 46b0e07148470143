use super::{rotated_iou, OrientedBox};

/// Greedy rotated non-maximum suppression.
///
/// Items are visited by descending score (equal scores: lower index first).
/// An item is suppressed when its rotated IoU with an already kept item of
/// the same group exceeds `iou_threshold`; with `class_agnostic` every item
/// is in one group. Returns kept indices in visiting order.
///
/// Scores are expected finite and the threshold in `[0, 1]`.
pub fn rotated_nms<C: PartialEq>(
    items: &[(OrientedBox, f64, C)],
    iou_threshold: f64,
    class_agnostic: bool,
) -> Vec<usize> {
    debug_assert!((0.0..=1.0).contains(&iou_threshold));
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[b].1.total_cmp(&items[a].1));

    let mut suppressed = vec![false; items.len()];
    let mut keep = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        let (ref kept_box, _, ref kept_cat) = items[i];
        for &j in &order[pos + 1..] {
            if suppressed[j] {
                continue;
            }
            let (ref other, _, ref cat) = items[j];
            if !class_agnostic && cat != kept_cat {
                continue;
            }
            if rotated_iou(kept_box, other) > iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    keep
}
