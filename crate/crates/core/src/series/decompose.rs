use std::io::Write;
use std::sync::Arc;

use super::{BlockKind, DailySeries, StudyCalendar};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Additive split of a daily series into block means and a daily residual.
///
/// `yearly` is constant on each fiscal-year block, `monthly` on each month,
/// `weekly` on each ISO week. `daily` is `None` on days with no observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendDecomposition {
    calendar: Arc<StudyCalendar>,
    pub yearly: Vec<f64>,
    pub monthly: Vec<f64>,
    pub weekly: Vec<f64>,
    pub daily: Vec<Option<f64>>,
}

impl TrendDecomposition {
    pub fn calendar(&self) -> &StudyCalendar {
        &self.calendar
    }

    pub fn shared_calendar(&self) -> &Arc<StudyCalendar> {
        &self.calendar
    }

    pub fn len(&self) -> usize {
        self.yearly.len()
    }

    pub fn is_empty(&self) -> bool {
        self.yearly.is_empty()
    }

    /// Sum of the three block components on day `i`.
    pub fn trend(&self, i: usize) -> f64 {
        self.yearly[i] + self.monthly[i] + self.weekly[i]
    }

    /// `yearly + monthly + weekly + daily` on day `i`, if observed.
    pub fn reconstruct(&self, i: usize) -> Option<f64> {
        self.daily[i].map(|d| self.trend(i) + d)
    }

    /// `date,value,yearly,monthly,weekly,daily` for the decomposed `series`;
    /// unobserved days leave `value` and `daily` blank.
    pub fn write_csv<W: Write>(&self, series: &DailySeries, out: W) -> Result<()> {
        if series.calendar() != self.calendar() {
            return Err(Error::CalendarMismatch);
        }
        let blank = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "value", "yearly", "monthly", "weekly", "daily"])?;
        for (i, date) in self.calendar.dates().enumerate() {
            w.write_record([
                date.to_string(),
                blank(series.values()[i]),
                self.yearly[i].to_string(),
                self.monthly[i].to_string(),
                self.weekly[i].to_string(),
                blank(self.daily[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Subtracts, level by level, the observed-day mean of each block from the
/// running residual.
fn remove_block_means(
    calendar: &StudyCalendar,
    kind: BlockKind,
    residual: &mut [Option<f64>],
) -> Result<Vec<f64>> {
    let mut component = vec![0.0; residual.len()];
    for block in calendar.blocks(kind) {
        let mut sum = CompensatedSum::new();
        let mut n = 0usize;
        for v in residual[block.days.clone()].iter().flatten() {
            sum.add(*v);
            n += 1;
        }
        if n == 0 {
            return Err(Error::UndefinedBlock {
                kind: kind.name(),
                label: block.label.clone(),
            });
        }
        let m = sum.value() / n as f64;
        for i in block.days.clone() {
            component[i] = m;
            if let Some(r) = residual[i].as_mut() {
                *r -= m;
            }
        }
    }
    Ok(component)
}

/// Computes the yearly / monthly / weekly / daily decomposition.
///
/// Fails when any year, month or week block has no observed day.
pub fn decompose(series: &DailySeries) -> Result<TrendDecomposition> {
    let calendar = series.calendar();
    let mut residual = series.values().to_vec();
    let yearly = remove_block_means(calendar, BlockKind::Year, &mut residual)?;
    let monthly = remove_block_means(calendar, BlockKind::Month, &mut residual)?;
    let weekly = remove_block_means(calendar, BlockKind::Week, &mut residual)?;
    // Recompute the residual from the original value so each observed day
    // reconstructs with a single rounding step.
    let daily = series
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v.map(|x| x - yearly[i] - monthly[i] - weekly[i]))
        .collect();
    Ok(TrendDecomposition {
        calendar: Arc::clone(series.shared_calendar()),
        yearly,
        monthly,
        weekly,
        daily,
    })
}
