use std::ops::Range;

use chrono::{Datelike, Duration, NaiveDate};

use crate::error::{Error, Result};

/// Granularity of a calendar block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    /// Fiscal year, April 1 to March 31.
    Year,
    /// Calendar year-month.
    Month,
    /// ISO week (Monday to Sunday), truncated at the study boundaries.
    Week,
}

impl BlockKind {
    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Year => "year",
            BlockKind::Month => "month",
            BlockKind::Week => "week",
        }
    }
}

/// A run of consecutive study days sharing one block at some granularity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub kind: BlockKind,
    /// Day indices covered, relative to the study start.
    pub days: Range<usize>,
    pub label: String,
}

/// A contiguous daily study period with its nested year, month and week blocks.
///
/// Every day belongs to exactly one block of each kind. Months nest inside
/// fiscal years; weeks may straddle month and year boundaries.
#[derive(Debug, Clone)]
pub struct StudyCalendar {
    start: NaiveDate,
    end: NaiveDate,
    years: Vec<Block>,
    months: Vec<Block>,
    weeks: Vec<Block>,
    year_of: Vec<u32>,
    month_of: Vec<u32>,
    week_of: Vec<u32>,
}

impl PartialEq for StudyCalendar {
    fn eq(&self, other: &Self) -> bool {
        self.start == other.start && self.end == other.end
    }
}

impl Eq for StudyCalendar {}

fn fiscal_year(date: NaiveDate) -> i32 {
    if date.month() >= 4 {
        date.year()
    } else {
        date.year() - 1
    }
}

impl StudyCalendar {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidPeriod { start, end });
        }
        let n = (end - start).num_days() as usize + 1;
        let mut cal = StudyCalendar {
            start,
            end,
            years: Vec::new(),
            months: Vec::new(),
            weeks: Vec::new(),
            year_of: Vec::with_capacity(n),
            month_of: Vec::with_capacity(n),
            week_of: Vec::with_capacity(n),
        };

        let mut prev: Option<(i32, (i32, u32), (i32, u32))> = None;
        for i in 0..n {
            let d = start + Duration::days(i as i64);
            let iso = d.iso_week();
            let key = (fiscal_year(d), (d.year(), d.month()), (iso.year(), iso.week()));
            let (new_year, new_month, new_week) = match prev {
                None => (true, true, true),
                Some(p) => (p.0 != key.0, p.1 != key.1, p.2 != key.2),
            };
            if new_year {
                cal.years.push(Block {
                    kind: BlockKind::Year,
                    days: i..i,
                    label: format!("FY{}-{:02}", key.0, (key.0 + 1) % 100),
                });
            }
            if new_month {
                cal.months.push(Block {
                    kind: BlockKind::Month,
                    days: i..i,
                    label: format!("{}-{:02}", key.1 .0, key.1 .1),
                });
            }
            if new_week {
                cal.weeks.push(Block {
                    kind: BlockKind::Week,
                    days: i..i,
                    label: format!("{}-W{:02}", key.2 .0, key.2 .1),
                });
            }
            for blocks in [&mut cal.years, &mut cal.months, &mut cal.weeks] {
                blocks.last_mut().expect("block opened above").days.end = i + 1;
            }
            cal.year_of.push(cal.years.len() as u32 - 1);
            cal.month_of.push(cal.months.len() as u32 - 1);
            cal.week_of.push(cal.weeks.len() as u32 - 1);
            prev = Some(key);
        }
        Ok(cal)
    }

    /// The ten fiscal years April 1, 2000 to March 31, 2010 (3,652 days).
    pub fn edmonton_decade() -> Self {
        Self::new(
            NaiveDate::from_ymd_opt(2000, 4, 1).unwrap(),
            NaiveDate::from_ymd_opt(2010, 3, 31).unwrap(),
        )
        .expect("valid fixed period")
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    pub fn len(&self) -> usize {
        self.year_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.year_of.is_empty()
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        date >= self.start && date <= self.end
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.contains(date)
            .then(|| (date - self.start).num_days() as usize)
    }

    pub fn date_of(&self, index: usize) -> NaiveDate {
        self.start + Duration::days(index as i64)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.len()).map(|i| self.date_of(i))
    }

    pub fn blocks(&self, kind: BlockKind) -> &[Block] {
        match kind {
            BlockKind::Year => &self.years,
            BlockKind::Month => &self.months,
            BlockKind::Week => &self.weeks,
        }
    }

    /// Index into [`Self::blocks`] of the block containing day `index`.
    pub fn block_of(&self, kind: BlockKind, index: usize) -> usize {
        let v = match kind {
            BlockKind::Year => &self.year_of,
            BlockKind::Month => &self.month_of,
            BlockKind::Week => &self.week_of,
        };
        v[index] as usize
    }

    /// Day ranges on which the year, month and week block are all constant
    /// (the intersection of a month block with a week block).
    pub fn trend_cells(&self) -> Vec<Range<usize>> {
        let mut cells: Vec<Range<usize>> = Vec::new();
        for i in 0..self.len() {
            let split = i == 0
                || self.month_of[i] != self.month_of[i - 1]
                || self.week_of[i] != self.week_of[i - 1];
            if split {
                cells.push(i..i + 1);
            } else {
                cells.last_mut().unwrap().end = i + 1;
            }
        }
        cells
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn decade_has_ten_fiscal_years_and_120_months() {
        let cal = StudyCalendar::edmonton_decade();
        assert_eq!(cal.len(), 3652);
        assert_eq!(cal.blocks(BlockKind::Year).len(), 10);
        assert_eq!(cal.blocks(BlockKind::Month).len(), 120);
        assert_eq!(cal.blocks(BlockKind::Year)[0].label, "FY2000-01");
        let fy2003 = &cal.blocks(BlockKind::Year)[3];
        assert_eq!(cal.date_of(fy2003.days.start), date(2003, 4, 1));
        assert_eq!(cal.date_of(fy2003.days.end - 1), date(2004, 3, 31));
    }

    #[test]
    fn blocks_partition_the_period_and_months_nest_in_years() {
        let cal = StudyCalendar::new(date(2001, 2, 20), date(2002, 5, 3)).unwrap();
        for kind in [BlockKind::Year, BlockKind::Month, BlockKind::Week] {
            let blocks = cal.blocks(kind);
            assert_eq!(blocks[0].days.start, 0);
            assert_eq!(blocks.last().unwrap().days.end, cal.len());
            for w in blocks.windows(2) {
                assert_eq!(w[0].days.end, w[1].days.start);
            }
            for (b, block) in blocks.iter().enumerate() {
                for i in block.days.clone() {
                    assert_eq!(cal.block_of(kind, i), b);
                }
            }
        }
        for i in 1..cal.len() {
            if cal.block_of(BlockKind::Month, i) == cal.block_of(BlockKind::Month, i - 1) {
                assert_eq!(
                    cal.block_of(BlockKind::Year, i),
                    cal.block_of(BlockKind::Year, i - 1)
                );
            }
        }
    }

    #[test]
    fn weeks_are_truncated_at_the_boundaries() {
        // 2000-04-01 is a Saturday: first ISO week block holds Sat and Sun only.
        let cal = StudyCalendar::edmonton_decade();
        assert_eq!(cal.blocks(BlockKind::Week)[0].days, 0..2);
        assert_eq!(cal.blocks(BlockKind::Week)[1].days.len(), 7);
    }

    #[test]
    fn trend_cells_split_on_month_and_week_changes() {
        let cal = StudyCalendar::new(date(2005, 5, 23), date(2005, 6, 12)).unwrap();
        let cells = cal.trend_cells();
        // Week of May 30 straddles June 1.
        let lens: Vec<usize> = cells.iter().map(|c| c.len()).collect();
        assert_eq!(lens, vec![7, 2, 5, 7]);
    }

    #[test]
    fn reversed_period_is_rejected() {
        assert!(StudyCalendar::new(date(2001, 1, 2), date(2001, 1, 1)).is_err());
    }
}
