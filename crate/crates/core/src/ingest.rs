//! Parsing of JHU-style time-series tables and weekly vaccination counts.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const JHU_FIXED_COLUMNS: [&str; 4] = ["Province/State", "Country/Region", "Lat", "Long"];
const JHU_DATE_FORMAT: &str = "%m/%d/%y";

/// Cumulative daily counts for one country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountrySeries {
    pub country: String,
    pub start_date: NaiveDate,
    pub values: Vec<f64>,
}

impl CountrySeries {
    pub fn end_date(&self) -> NaiveDate {
        self.start_date + chrono::Days::new(self.values.len().saturating_sub(1) as u64)
    }

    /// Keeps at most the first `n` days.
    pub fn truncated(mut self, n: usize) -> Self {
        self.values.truncate(n);
        self
    }

    /// Writes the series back as a single-row JHU table.
    pub fn to_jhu_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = JHU_FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
        header.extend((0..self.values.len()).map(|k| format_jhu_date(self.start_date + chrono::Days::new(k as u64))));
        w.write_record(&header)?;
        let mut row = vec![String::new(), self.country.clone(), "0".into(), "0".into()];
        row.extend(self.values.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

/// `1/22/20` style, no zero padding.
pub fn format_jhu_date(d: NaiveDate) -> String {
    d.format("%-m/%-d/%y").to_string()
}

pub fn parse_jhu_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), JHU_DATE_FORMAT)
        .map_err(|e| Error::InvalidInput(format!("bad date column {s:?}: {e}")))
}

/// Extracts one country from a JHU time-series table, summing all of its
/// province rows column-wise.
pub fn parse_jhu_timeseries(content: &str, country: &str) -> Result<CountrySeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(content.as_bytes());
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| Error::InvalidInput("empty JHU file".into()))??;
    if header.len() < JHU_FIXED_COLUMNS.len()
        || header
            .iter()
            .zip(JHU_FIXED_COLUMNS)
            .any(|(got, want)| got.trim() != want)
    {
        return Err(Error::InvalidInput(format!(
            "JHU header must start with {:?}, got {:?}",
            JHU_FIXED_COLUMNS,
            header.iter().take(4).collect::<Vec<_>>()
        )));
    }
    let dates = header
        .iter()
        .skip(JHU_FIXED_COLUMNS.len())
        .map(parse_jhu_date)
        .collect::<Result<Vec<_>>>()?;
    let start_date = *dates
        .first()
        .ok_or_else(|| Error::InvalidInput("JHU file has no date columns".into()))?;
    for (k, d) in dates.iter().enumerate() {
        if *d != start_date + chrono::Days::new(k as u64) {
            return Err(Error::InvalidInput(format!("date columns are not contiguous at {d}")));
        }
    }

    let mut sum = vec![0.0; dates.len()];
    let mut matched = false;
    let mut countries = std::collections::BTreeSet::new();
    for (line, record) in records.enumerate() {
        let record = record?;
        let row = line + 2;
        if record.len() != header.len() {
            return Err(Error::InvalidInput(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        let name = record[1].trim();
        countries.insert(name.to_string());
        if name != country {
            continue;
        }
        matched = true;
        for (k, cell) in record.iter().skip(JHU_FIXED_COLUMNS.len()).enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("row {row}, column {}: non-numeric value {cell:?}", k + 5)))?;
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "row {row}, column {}: non-finite value",
                    k + 5
                )));
            }
            sum[k] += v;
        }
    }
    if !matched {
        return Err(Error::UnknownCountry {
            requested: country.to_string(),
            available: countries.into_iter().collect::<Vec<_>>().join(", "),
        });
    }
    Ok(CountrySeries {
        country: country.to_string(),
        start_date,
        values: sum,
    })
}

/// A cumulative series after monotone repair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanedSeries {
    pub values: Vec<f64>,
    /// Points raised to the running maximum.
    pub adjusted: usize,
}

/// Replaces downward revisions with the running maximum.
pub fn clean_cumulative(values: &[f64]) -> CleanedSeries {
    let mut adjusted = 0;
    let mut best = f64::NEG_INFINITY;
    let values = values
        .iter()
        .map(|&v| {
            if v < best {
                adjusted += 1;
                best
            } else {
                best = v;
                v
            }
        })
        .collect();
    CleanedSeries { values, adjusted }
}

/// First difference with `out[0] = values[0]`.
pub fn daily_from_cumulative(values: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    values
        .iter()
        .map(|&v| {
            let d = v - prev;
            prev = v;
            d
        })
        .collect()
}

/// First-dose count for the week starting on `start_day` (day offset).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeeklyDoses {
    pub start_day: i64,
    pub count: f64,
}

/// Daily first doses and the lagged immunization rate derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaccinationSchedule {
    /// Day offset of `daily_doses[0]`.
    pub first_day: i64,
    pub daily_doses: Vec<f64>,
    pub lag_days: u32,
}

impl VaccinationSchedule {
    pub fn none(lag_days: u32) -> Self {
        Self {
            first_day: 0,
            daily_doses: Vec::new(),
            lag_days,
        }
    }

    pub fn doses_on(&self, day: i64) -> f64 {
        usize::try_from(day - self.first_day)
            .ok()
            .and_then(|k| self.daily_doses.get(k))
            .copied()
            .unwrap_or(0.0)
    }

    /// People per day becoming immune on `day`: the doses given `lag_days`
    /// earlier.
    pub fn effective_rate(&self, day: i64) -> f64 {
        self.doses_on(day - i64::from(self.lag_days))
    }

    pub fn total_doses(&self) -> f64 {
        self.daily_doses.iter().sum()
    }
}

/// Spreads each week's count evenly over its seven days.
pub fn weekly_to_daily_vaccination(weeks: &[WeeklyDoses], lag_days: u32) -> Result<VaccinationSchedule> {
    weekly_to_daily_vaccination_until(weeks, lag_days, None)
}

/// As [`weekly_to_daily_vaccination`]; when `last_day` cuts the final week
/// short, that week's count is spread over the days actually covered.
pub fn weekly_to_daily_vaccination_until(
    weeks: &[WeeklyDoses],
    lag_days: u32,
    last_day: Option<i64>,
) -> Result<VaccinationSchedule> {
    let Some(first) = weeks.first() else {
        return Ok(VaccinationSchedule::none(lag_days));
    };
    for w in weeks {
        if !(w.count.is_finite() && w.count >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "week at day {}: negative or non-finite count",
                w.start_day
            )));
        }
    }
    for pair in weeks.windows(2) {
        if pair[1].start_day < pair[0].start_day + 7 {
            return Err(Error::InvalidInput(format!(
                "weeks starting at days {} and {} overlap",
                pair[0].start_day, pair[1].start_day
            )));
        }
    }
    let mut end = weeks.last().map(|w| w.start_day + 7).unwrap_or(first.start_day);
    if let Some(last) = last_day {
        if last < first.start_day {
            return Err(Error::InvalidInput(format!(
                "cut-off day {last} precedes the first week"
            )));
        }
        end = end.min(last + 1);
    }
    let mut daily = vec![0.0; (end - first.start_day) as usize];
    for w in weeks {
        let covered = (end - w.start_day).clamp(0, 7);
        if covered == 0 {
            continue;
        }
        let per_day = w.count / covered as f64;
        let offset = (w.start_day - first.start_day) as usize;
        for slot in &mut daily[offset..offset + covered as usize] {
            *slot = per_day;
        }
    }
    Ok(VaccinationSchedule {
        first_day: first.start_day,
        daily_doses: daily,
        lag_days,
    })
}

/// Parses a `week_start,first_doses` table (ISO dates, integer counts) into
/// day offsets relative to `origin`.
pub fn parse_vaccination_csv(content: &str, origin: NaiveDate) -> Result<Vec<WeeklyDoses>> {
    let mut reader = csv::Reader::from_reader(content.as_bytes());
    let header = reader.headers()?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols != ["week_start", "first_doses"] {
        return Err(Error::InvalidInput(format!(
            "vaccination header must be week_start,first_doses, got {}",
            cols.join(",")
        )));
    }
    let mut weeks = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = line + 2;
        let date = NaiveDate::parse_from_str(record[0].trim(), "%Y-%m-%d")
            .map_err(|e| Error::InvalidInput(format!("row {row}: bad week_start {:?}: {e}", &record[0])))?;
        let count: u64 = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("row {row}: first_doses {:?} is not a count", &record[1])))?;
        let day = (date - origin).num_days();
        if weeks.insert(day, count as f64).is_some() {
            return Err(Error::InvalidInput(format!("row {row}: duplicate week {date}")));
        }
    }
    Ok(weeks
        .into_iter()
        .map(|(start_day, count)| WeeklyDoses { start_day, count })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE: &str = "Province/State,Country/Region,Lat,Long,1/22/20,1/23/20,1/24/20\n,X,1.0,2.0,0,1,3\n";

    #[test]
    fn single_row() {
        let s = parse_jhu_timeseries(SINGLE, "X").unwrap();
        assert_eq!(s.values, vec![0.0, 1.0, 3.0]);
        assert_eq!(s.start_date, NaiveDate::from_ymd_opt(2020, 1, 22).unwrap());
        assert_eq!(s.end_date(), NaiveDate::from_ymd_opt(2020, 1, 24).unwrap());
    }

    #[test]
    fn provinces_are_summed() {
        let csv = "Province/State,Country/Region,Lat,Long,12/30/20,12/31/20,1/1/21\n\
                   North,Y,0,0,1,1,1\n\"South, Coast\",Y,0,0,2,2,2\n,Z,0,0,5,5,5\n";
        let s = parse_jhu_timeseries(csv, "Y").unwrap();
        assert_eq!(s.values, vec![3.0, 3.0, 3.0]);
    }

    #[test]
    fn unknown_country_lists_alternatives() {
        let err = parse_jhu_timeseries(SINGLE, "India").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("India") && msg.contains("X"), "{msg}");
    }

    #[test]
    fn rejects_malformed_tables() {
        let ragged = "Province/State,Country/Region,Lat,Long,1/22/20,1/23/20\n,X,0,0,1\n";
        assert!(parse_jhu_timeseries(ragged, "X").is_err());
        let text = "Province/State,Country/Region,Lat,Long,1/22/20\n,X,0,0,many\n";
        assert!(parse_jhu_timeseries(text, "X")
            .unwrap_err()
            .to_string()
            .contains("non-numeric"));
        let header = "State,Country,Lat,Long,1/22/20\n,X,0,0,1\n";
        assert!(parse_jhu_timeseries(header, "X").is_err());
        let gap = "Province/State,Country/Region,Lat,Long,1/22/20,1/24/20\n,X,0,0,1,2\n";
        assert!(parse_jhu_timeseries(gap, "X").is_err());
    }

    #[test]
    fn round_trip_through_csv() {
        let s = CountrySeries {
            country: "Some, Place".into(),
            start_date: NaiveDate::from_ymd_opt(2021, 2, 27).unwrap(),
            values: vec![0.0, 4.0, 4.0, 17.0, 250000.0],
        };
        let back = parse_jhu_timeseries(&s.to_jhu_csv().unwrap(), "Some, Place").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn cleaning() {
        assert_eq!(
            clean_cumulative(&[0.0, 5.0, 3.0, 7.0]),
            CleanedSeries {
                values: vec![0.0, 5.0, 5.0, 7.0],
                adjusted: 1
            }
        );
        let mono = [0.0, 1.0, 1.0, 9.0];
        assert_eq!(
            clean_cumulative(&mono),
            CleanedSeries {
                values: mono.to_vec(),
                adjusted: 0
            }
        );
        let flat = [4.0; 5];
        assert_eq!(clean_cumulative(&flat).values, flat.to_vec());
        assert_eq!(daily_from_cumulative(&[2.0, 5.0, 5.0, 7.0]), vec![2.0, 3.0, 0.0, 2.0]);
    }

    #[test]
    fn one_week_spread_and_lagged() {
        let s = weekly_to_daily_vaccination(
            &[WeeklyDoses {
                start_day: 10,
                count: 700.0,
            }],
            30,
        )
        .unwrap();
        for day in -5..100 {
            let expect = if (40..=46).contains(&day) { 100.0 } else { 0.0 };
            assert_eq!(s.effective_rate(day), expect, "day {day}");
        }
    }

    #[test]
    fn consecutive_weeks_and_zero() {
        let weeks = [
            WeeklyDoses {
                start_day: 0,
                count: 700.0,
            },
            WeeklyDoses {
                start_day: 7,
                count: 1400.0,
            },
        ];
        let s = weekly_to_daily_vaccination(&weeks, 30).unwrap();
        assert_eq!(s.daily_doses, [vec![100.0; 7], vec![200.0; 7]].concat());
        assert_eq!(s.effective_rate(36), 100.0);
        assert_eq!(s.effective_rate(37), 200.0);

        let zero = weekly_to_daily_vaccination(
            &[WeeklyDoses {
                start_day: 0,
                count: 0.0,
            }],
            30,
        )
        .unwrap();
        assert!((0..100).all(|d| zero.effective_rate(d) == 0.0));
        assert_eq!(weekly_to_daily_vaccination(&[], 30).unwrap().total_doses(), 0.0);
    }

    #[test]
    fn overlapping_weeks_rejected() {
        let weeks = [
            WeeklyDoses {
                start_day: 0,
                count: 7.0,
            },
            WeeklyDoses {
                start_day: 5,
                count: 7.0,
            },
        ];
        assert!(weekly_to_daily_vaccination(&weeks, 30).is_err());
    }

    #[test]
    fn partial_last_week_is_prorated() {
        let weeks = [
            WeeklyDoses {
                start_day: 0,
                count: 70.0,
            },
            WeeklyDoses {
                start_day: 7,
                count: 30.0,
            },
        ];
        let s = weekly_to_daily_vaccination_until(&weeks, 0, Some(9)).unwrap();
        assert_eq!(s.daily_doses.len(), 10);
        assert_eq!(&s.daily_doses[7..], &[10.0, 10.0, 10.0]);
        assert_eq!(s.total_doses(), 100.0);
    }

    #[test]
    fn vaccination_csv() {
        let origin = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let text = "week_start,first_doses\n2021-01-16,700\n2021-01-23,1400\n";
        let weeks = parse_vaccination_csv(text, origin).unwrap();
        assert_eq!(
            weeks,
            vec![
                WeeklyDoses {
                    start_day: 15,
                    count: 700.0
                },
                WeeklyDoses {
                    start_day: 22,
                    count: 1400.0
                }
            ]
        );
        assert!(parse_vaccination_csv("week,doses\n2021-01-16,1\n", origin).is_err());
        assert!(parse_vaccination_csv("week_start,first_doses\n2021-01-16,-4\n", origin).is_err());
        assert!(parse_vaccination_csv("week_start,first_doses\n16/01/2021,4\n", origin).is_err());
    }
}
