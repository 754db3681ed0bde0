use crate::scalar::Real;
use crate::skeleton::BBox;

/// Generalized intersection over union, in `[-1, 1]`.
///
/// When both boxes have zero area the IoU term is taken as 0, so only the
/// hull penalty remains. Identical boxes always score 1.
pub fn giou<T: Real>(a: &BBox<T>, b: &BBox<T>) -> T {
    if a == b {
        return T::one();
    }
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    let hull = a.hull(b).area();
    let iou = if union > T::zero() { inter / union } else { T::zero() };
    let penalty = if hull > T::zero() {
        (hull - union) / hull
    } else {
        T::zero()
    };
    iou - penalty
}
