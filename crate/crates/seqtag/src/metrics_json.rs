//! Machine-readable evaluation output.

use seqtag_core::eval::{ClassCounts, Metrics, Prf};
use serde_json::{json, Map, Value};

fn entry(c: &ClassCounts, p: &Prf) -> Value {
    json!({
        "tp": c.tp,
        "fp": c.fp,
        "fn": c.fn_,
        "precision": p.precision,
        "recall": p.recall,
        "f1": p.f1,
    })
}

/// `{ "<class>": {tp, fp, fn, precision, recall, f1}, …, "aggregate": {…} }`
/// with full-precision ratios.
pub fn metrics_to_json(metrics: &Metrics) -> Value {
    let mut map = Map::new();
    for (name, c, p) in &metrics.classes {
        map.insert(name.clone(), entry(c, p));
    }
    map.insert("aggregate".into(), entry(&metrics.micro.0, &metrics.micro.1));
    Value::Object(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use seqtag_core::corpus::TagScheme;

    #[test]
    fn shape() {
        let scheme = TagScheme::new(&["drug"]).unwrap();
        let m = Metrics::from_counts(&scheme, &[ClassCounts::from_tp_fp_total(1, 1, 2)]);
        let v = metrics_to_json(&m);
        assert_eq!(v["drug"]["tp"], 1);
        assert_eq!(v["drug"]["fn"], 1);
        assert_eq!(v["aggregate"]["precision"], 0.5);
    }
}
