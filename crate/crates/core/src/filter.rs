//! Single-frame predicates over tracked objects and detections.
//!
//! Filters are built by composing named predicates rather than subclassing:
//!
//! ```
//! use ars548::filter::{compose_and, min_speed_predicate, moving_only};
//!
//! let traffic = compose_and(vec![min_speed_predicate(10.0).unwrap(), moving_only()]);
//! assert_eq!(traffic.name(), "(min_speed_kmh=10 & moving_only=true)");
//! ```

use std::fmt;
use std::sync::Arc;

use crate::model::{
    object_speed, Classification, Detection, DetectionList, MovementStatus, ObjectList,
    TrackedObject, KMH_PER_MPS,
};

/// A named, pure decision function.
pub struct Predicate<T> {
    name: String,
    decide: Arc<dyn Fn(&T) -> bool + Send + Sync>,
}

pub type ObjectPredicate = Predicate<TrackedObject>;
pub type DetectionPredicate = Predicate<Detection>;

impl<T> Predicate<T> {
    pub fn new(name: impl Into<String>, decide: impl Fn(&T) -> bool + Send + Sync + 'static) -> Self {
        Predicate { name: name.into(), decide: Arc::new(decide) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn accepts(&self, item: &T) -> bool {
        (self.decide)(item)
    }
}

impl<T> Clone for Predicate<T> {
    fn clone(&self) -> Self {
        Predicate { name: self.name.clone(), decide: Arc::clone(&self.decide) }
    }
}

impl<T> fmt::Debug for Predicate<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Predicate").field(&self.name).finish()
    }
}

pub fn always<T>() -> Predicate<T> {
    Predicate::new("true", |_| true)
}

pub fn never<T>() -> Predicate<T> {
    Predicate::new("false", |_| false)
}

/// Conjunction; the empty conjunction accepts everything.
pub fn compose_and<T: 'static>(preds: Vec<Predicate<T>>) -> Predicate<T> {
    if preds.is_empty() {
        return always();
    }
    let name = format!("({})", preds.iter().map(|p| p.name.as_str()).collect::<Vec<_>>().join(" & "));
    Predicate::new(name, move |x| preds.iter().all(|p| p.accepts(x)))
}

/// Disjunction; the empty disjunction rejects everything.
pub fn compose_or<T: 'static>(preds: Vec<Predicate<T>>) -> Predicate<T> {
    if preds.is_empty() {
        return never();
    }
    let name = format!("({})", preds.iter().map(|p| p.name.as_str()).collect::<Vec<_>>().join(" | "));
    Predicate::new(name, move |x| preds.iter().any(|p| p.accepts(x)))
}

pub fn negate<T: 'static>(pred: Predicate<T>) -> Predicate<T> {
    Predicate::new(format!("!{}", pred.name), move |x| !pred.accepts(x))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error("speed threshold must be a non-negative number of km/h, got {0}")]
    NegativeThreshold(f64),
    #[error("malformed filter term `{0}` (expected key=value)")]
    MalformedTerm(String),
    #[error("unknown filter key `{0}` (expected min_speed_kmh, class or moving_only)")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
}

/// Accepts objects strictly faster than `threshold_kmh`.
pub fn min_speed_predicate(threshold_kmh: f64) -> Result<ObjectPredicate, FilterError> {
    if !(threshold_kmh >= 0.0) {
        return Err(FilterError::NegativeThreshold(threshold_kmh));
    }
    let threshold_mps = threshold_kmh / KMH_PER_MPS;
    Ok(Predicate::new(format!("min_speed_kmh={threshold_kmh}"), move |o: &TrackedObject| {
        object_speed(o) > threshold_mps
    }))
}

/// Accepts objects whose most probable class is `class`.
pub fn class_predicate(class: Classification) -> ObjectPredicate {
    Predicate::new(format!("class={}", format!("{class:?}").to_ascii_uppercase()), move |o: &TrackedObject| {
        o.dominant_class() == class
    })
}

pub fn moving_only() -> ObjectPredicate {
    Predicate::new("moving_only=true", |o: &TrackedObject| o.status_movement == MovementStatus::Moving)
}

/// Accepts detections with none of the `mask` bits set in `invalid_flags`.
pub fn valid_flags_predicate(mask: u8) -> DetectionPredicate {
    Predicate::new(format!("valid_mask={mask:#04x}"), move |d: &Detection| d.invalid_flags & mask == 0)
}

pub fn min_rcs_predicate(min_dbsm: i8) -> DetectionPredicate {
    Predicate::new(format!("min_rcs={min_dbsm}"), move |d: &Detection| d.rcs >= min_dbsm)
}

pub fn filter_objects(list: &ObjectList, pred: &ObjectPredicate) -> ObjectList {
    ObjectList {
        stamp: list.stamp,
        sequence_counter: list.sequence_counter,
        objects: list.objects.iter().filter(|o| pred.accepts(o)).copied().collect(),
    }
}

pub fn filter_detections(list: &DetectionList, pred: &DetectionPredicate) -> DetectionList {
    DetectionList {
        detections: list.detections.iter().filter(|d| pred.accepts(d)).copied().collect(),
        ..list.clone()
    }
}

/// Parses a filter expression: `key=value` terms joined by `&`.
///
/// Keys: `min_speed_kmh` (non-negative number), `class` (classification name,
/// matched against the dominant class), `moving_only` (`true`/`false`).
/// Whitespace around terms is ignored; an empty expression accepts everything.
pub fn parse_filter_expr(expr: &str) -> Result<ObjectPredicate, FilterError> {
    let mut preds = Vec::new();
    for term in expr.split('&').map(str::trim).filter(|t| !t.is_empty()) {
        let (key, value) = term
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| FilterError::MalformedTerm(term.to_string()))?;
        let bad = |reason: String| FilterError::BadValue { key: key.to_string(), reason };
        match key {
            "min_speed_kmh" => {
                let kmh: f64 = value.parse().map_err(|e| bad(format!("{e}")))?;
                preds.push(min_speed_predicate(kmh)?);
            }
            "class" => preds.push(class_predicate(value.parse().map_err(bad)?)),
            "moving_only" => match value {
                "true" => preds.push(moving_only()),
                "false" => {}
                other => return Err(bad(format!("expected true or false, got `{other}`"))),
            },
            other => return Err(FilterError::UnknownKey(other.to_string())),
        }
    }
    Ok(match preds.len() {
        1 => preds.pop().unwrap(),
        _ => compose_and(preds),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MeasurementStatus, SyncStatus, Timestamp};
    use proptest::prelude::*;

    fn obj(id: u32, vx: f32, vy: f32, class: Classification) -> TrackedObject {
        let mut probs = [0u8; 8];
        probs[class as usize] = 100;
        TrackedObject {
            id,
            age: 1,
            status_measurement: MeasurementStatus::Measured,
            status_movement: if vx == 0.0 && vy == 0.0 { MovementStatus::Stationary } else { MovementStatus::Moving },
            position_x: 10.0,
            position_y: id as f32,
            position_z: 0.0,
            position_std_x: 0.0,
            position_std_y: 0.0,
            position_std_z: 0.0,
            orientation_yaw: 0.0,
            orientation_yaw_std: 0.0,
            velocity_rel_x: vx,
            velocity_rel_y: vy,
            velocity_std_x: 0.0,
            velocity_std_y: 0.0,
            acceleration_rel_x: 0.0,
            acceleration_rel_y: 0.0,
            acceleration_std_x: 0.0,
            acceleration_std_y: 0.0,
            yaw_rate: 0.0,
            shape_length: 1.0,
            shape_width: 1.0,
            classification_probabilities: probs,
        }
    }

    fn kmh(v: f64) -> f32 {
        (v / 3.6) as f32
    }

    fn list(objects: Vec<TrackedObject>) -> ObjectList {
        ObjectList { stamp: Timestamp::new(11, 22, SyncStatus::Ok), sequence_counter: 5, objects }
    }

    #[test]
    fn identity_and_annihilating_filters() {
        let l = list(vec![obj(1, 1.0, 0.0, Classification::Car), obj(2, 0.0, 0.0, Classification::Truck)]);
        assert_eq!(filter_objects(&l, &always()), l);
        let empty = filter_objects(&l, &never());
        assert!(empty.objects.is_empty());
        assert_eq!(empty.stamp, l.stamp);
        assert_eq!(empty.sequence_counter, l.sequence_counter);
    }

    #[test]
    fn traffic_filter_keeps_fast_vehicle() {
        let l = list(vec![obj(1, kmh(5.0), 0.0, Classification::Car), obj(2, kmh(50.0), 0.0, Classification::Car)]);
        let out = filter_objects(&l, &min_speed_predicate(10.0).unwrap());
        assert_eq!(out.objects.iter().map(|o| o.id).collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn threshold_is_strict() {
        let p = min_speed_predicate(10.0).unwrap();
        // Speed exactly 10 km/h in f64 terms.
        let mut o = obj(1, 0.0, 0.0, Classification::Car);
        o.velocity_rel_x = kmh(10.0);
        let speed = object_speed(&o);
        assert_eq!(p.accepts(&o), speed > 10.0 / 3.6);
        // Nudge below the threshold by one ulp in f32: must be rejected.
        o.velocity_rel_x = f32::from_bits(kmh(10.0).to_bits() - 1);
        assert!(!p.accepts(&o));
    }

    #[test]
    fn zero_threshold_accepts_any_moving_object() {
        let p = min_speed_predicate(0.0).unwrap();
        assert!(p.accepts(&obj(1, 0.01, 0.0, Classification::Car)));
        assert!(!p.accepts(&obj(1, 0.0, 0.0, Classification::Car)));
    }

    #[test]
    fn eighteen_kmh_passes() {
        let o = obj(1, -4.0, 3.0, Classification::Car);
        // Oracle: explicit Pythagoras, not object_speed.
        let oracle_kmh = ((-4.0f64).powi(2) + 3.0f64.powi(2)).sqrt() * 3.6;
        assert!((oracle_kmh - 18.0).abs() < 1e-12);
        assert!(min_speed_predicate(10.0).unwrap().accepts(&o));
    }

    #[test]
    fn negative_threshold_rejected() {
        assert_eq!(min_speed_predicate(-1.0).unwrap_err(), FilterError::NegativeThreshold(-1.0));
        assert!(min_speed_predicate(f64::NAN).is_err());
    }

    #[test]
    fn empty_compositions() {
        let o = obj(1, 0.0, 0.0, Classification::Car);
        assert!(compose_and::<TrackedObject>(vec![]).accepts(&o));
        assert!(!compose_or::<TrackedObject>(vec![]).accepts(&o));
    }

    #[test]
    fn fast_pedestrian_is_not_a_car() {
        let runner = obj(3, kmh(20.0), 0.0, Classification::Pedestrian);
        let fast = min_speed_predicate(10.0).unwrap();
        let car = class_predicate(Classification::Car);
        assert!(fast.accepts(&runner));
        assert!(!car.accepts(&runner));
        assert!(!compose_and(vec![fast, car]).accepts(&runner));
    }

    #[test]
    fn detection_predicates() {
        let mut d = crate::codec::tests::sample_detection();
        d.invalid_flags = 0;
        d.rcs = 3;
        assert!(valid_flags_predicate(0b11).accepts(&d));
        d.invalid_flags = 0b10;
        assert!(!valid_flags_predicate(0b11).accepts(&d));
        assert!(min_rcs_predicate(3).accepts(&d));
        assert!(!min_rcs_predicate(4).accepts(&d));
        let dl = DetectionList {
            stamp: Timestamp::new(1, 1, SyncStatus::Ok),
            sequence_counter: 0,
            origin_x: 0.0,
            origin_y: 0.0,
            origin_z: 0.0,
            detections: vec![d, crate::codec::tests::sample_detection()],
        };
        assert_eq!(filter_detections(&dl, &min_rcs_predicate(0)).detections.len(), 1);
    }

    #[test]
    fn filter_expressions() {
        let p = parse_filter_expr("min_speed_kmh=10").unwrap();
        assert_eq!(p.name(), "min_speed_kmh=10");
        let p = parse_filter_expr(" min_speed_kmh=10 & class=CAR & moving_only=true ").unwrap();
        assert!(p.accepts(&obj(1, kmh(30.0), 0.0, Classification::Car)));
        assert!(!p.accepts(&obj(1, kmh(30.0), 0.0, Classification::Truck)));
        assert!(parse_filter_expr("").unwrap().accepts(&obj(1, 0.0, 0.0, Classification::Car)));
        assert_eq!(parse_filter_expr("speed").unwrap_err(), FilterError::MalformedTerm("speed".into()));
        assert_eq!(parse_filter_expr("foo=1").unwrap_err(), FilterError::UnknownKey("foo".into()));
        assert!(matches!(parse_filter_expr("class=SHIP"), Err(FilterError::BadValue { .. })));
        assert!(matches!(parse_filter_expr("min_speed_kmh=-3"), Err(FilterError::NegativeThreshold(_))));
    }

    fn arb_object() -> impl Strategy<Value = TrackedObject> {
        (any::<u32>(), -30f32..30.0, -30f32..30.0, 0usize..8).prop_map(|(id, vx, vy, c)| {
            obj(id, vx, vy, Classification::ALL[c])
        })
    }

    fn arb_pred() -> impl Strategy<Value = ObjectPredicate> {
        prop_oneof![
            (0f64..100.0).prop_map(|t| min_speed_predicate(t).unwrap()),
            (0usize..8).prop_map(|c| class_predicate(Classification::ALL[c])),
            Just(moving_only()),
        ]
    }

    proptest! {
        #[test]
        fn output_is_ordered_subsequence(objs in proptest::collection::vec(arb_object(), 0..30), p in arb_pred()) {
            let l = list(objs);
            let out = filter_objects(&l, &p);
            prop_assert!(out.objects.len() <= l.objects.len());
            let mut it = l.objects.iter();
            for o in &out.objects {
                prop_assert!(it.any(|x| x == o));
            }
            prop_assert_eq!(filter_objects(&out, &p), out);
        }

        #[test]
        fn and_is_intersection(objs in proptest::collection::vec(arb_object(), 0..30), p in arb_pred(), q in arb_pred()) {
            let both = compose_and(vec![p.clone(), q.clone()]);
            let either = compose_or(vec![p.clone(), q.clone()]);
            let not_not = negate(negate(p.clone()));
            for o in &objs {
                prop_assert_eq!(both.accepts(o), p.accepts(o) && q.accepts(o));
                prop_assert_eq!(either.accepts(o), p.accepts(o) || q.accepts(o));
                prop_assert_eq!(not_not.accepts(o), p.accepts(o));
            }
        }
    }
}
