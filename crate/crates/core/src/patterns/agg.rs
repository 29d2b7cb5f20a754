use std::fmt;

/// Aggregation applied to the attribute values collected by `interval_aggregate`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AggFn {
    Sum,
    Avg,
    Min,
    Max,
    Count,
    Var,
    Stddev,
    CountAbove(f64),
    CountBelow(f64),
}

impl AggFn {
    pub const NAMES: [&'static str; 9] =
        ["sum", "avg", "min", "max", "count", "var", "stddev", "count_above", "count_below"];

    pub fn name(self) -> &'static str {
        match self {
            AggFn::Sum => "sum",
            AggFn::Avg => "avg",
            AggFn::Min => "min",
            AggFn::Max => "max",
            AggFn::Count => "count",
            AggFn::Var => "var",
            AggFn::Stddev => "stddev",
            AggFn::CountAbove(_) => "count_above",
            AggFn::CountBelow(_) => "count_below",
        }
    }

    /// Builds an aggregation from its name. The threshold must be given for
    /// `count_above`/`count_below` and must be absent otherwise.
    pub fn parse(name: &str, threshold: Option<f64>) -> Result<AggFn, String> {
        let needs = matches!(name, "count_above" | "count_below");
        match (needs, threshold) {
            (true, None) => return Err(format!("agg '{name}' requires a threshold")),
            (false, Some(_)) if AggFn::NAMES.contains(&name) => {
                return Err(format!("threshold does not apply to agg '{name}'"))
            }
            _ => {}
        }
        Ok(match name {
            "sum" => AggFn::Sum,
            "avg" => AggFn::Avg,
            "min" => AggFn::Min,
            "max" => AggFn::Max,
            "count" => AggFn::Count,
            "var" => AggFn::Var,
            "stddev" => AggFn::Stddev,
            "count_above" => AggFn::CountAbove(threshold.unwrap_or_default()),
            "count_below" => AggFn::CountBelow(threshold.unwrap_or_default()),
            other => {
                return Err(format!(
                    "unknown agg '{other}' (expected one of {})",
                    AggFn::NAMES.join(", ")
                ))
            }
        })
    }

    pub fn threshold(self) -> Option<f64> {
        match self {
            AggFn::CountAbove(t) | AggFn::CountBelow(t) => Some(t),
            _ => None,
        }
    }

    /// Count-type aggregations produce a value (possibly 0) for every window.
    pub fn is_count(self) -> bool {
        matches!(self, AggFn::Count | AggFn::CountAbove(_) | AggFn::CountBelow(_))
    }

    pub fn unit(self) -> &'static str {
        if self.is_count() {
            "count"
        } else {
            ""
        }
    }

    /// Applies the aggregation. `values` are the numeric attribute values in
    /// event order; `events` is the number of matching events, numeric or not,
    /// which is what plain `count` reports.
    pub fn apply(self, values: &[f64], events: usize) -> Option<f64> {
        if !self.is_count() && values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let sum = || values.iter().sum::<f64>();
        let var = || {
            let mean = sum() / n;
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
        };
        Some(match self {
            AggFn::Sum => sum(),
            AggFn::Avg => sum() / n,
            AggFn::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            AggFn::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            AggFn::Count => events as f64,
            AggFn::Var => var(),
            AggFn::Stddev => var().sqrt(),
            AggFn::CountAbove(t) => values.iter().filter(|&&v| v > t).count() as f64,
            AggFn::CountBelow(t) => values.iter().filter(|&&v| v < t).count() as f64,
        })
    }
}

impl fmt::Display for AggFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_of_ten_and_twelve() {
        assert_eq!(AggFn::Avg.apply(&[10.0, 12.0], 2), Some(11.0));
    }

    #[test]
    fn threshold_counts_are_strict() {
        let above = AggFn::parse("count_above", Some(11.0)).unwrap();
        assert_eq!(above.apply(&[10.0, 12.0], 2), Some(1.0));
        assert_eq!(above.apply(&[11.0], 1), Some(0.0));
        let below = AggFn::parse("count_below", Some(11.0)).unwrap();
        assert_eq!(below.apply(&[10.0, 11.0, 12.0], 3), Some(1.0));
    }

    #[test]
    fn empty_windows() {
        for name in ["sum", "avg", "min", "max", "var", "stddev"] {
            assert_eq!(AggFn::parse(name, None).unwrap().apply(&[], 0), None, "{name}");
        }
        assert_eq!(AggFn::Count.apply(&[], 0), Some(0.0));
        assert_eq!(AggFn::CountAbove(1.0).apply(&[], 0), Some(0.0));
    }

    #[test]
    fn spread_is_population_variance() {
        let v = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert_eq!(AggFn::Var.apply(&v, 8), Some(4.0));
        assert_eq!(AggFn::Stddev.apply(&v, 8), Some(2.0));
        assert_eq!(AggFn::Min.apply(&v, 8), Some(2.0));
        assert_eq!(AggFn::Max.apply(&v, 8), Some(9.0));
        assert_eq!(AggFn::Sum.apply(&v, 8), Some(40.0));
    }

    #[test]
    fn plain_count_counts_events_not_values() {
        assert_eq!(AggFn::Count.apply(&[1.0], 3), Some(3.0));
    }

    #[test]
    fn threshold_presence_is_checked() {
        assert!(AggFn::parse("count_above", None).is_err());
        assert!(AggFn::parse("avg", Some(1.0)).is_err());
        assert!(AggFn::parse("median", None).unwrap_err().contains("unknown agg"));
    }
}
