/// Partition of the Unicode scalar values into disjoint character classes.
///
/// Classes `0..ranges.len()` are the elementary intervals cut out by every
/// range mentioned in a pattern; the final class (`other`) collects every
/// scalar value the pattern never mentions. Bounds are kept as `u32` so an
/// interval may straddle the surrogate gap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharClasses {
    ranges: Vec<(u32, u32)>,
}

impl CharClasses {
    /// Builds the coarsest partition in which each input range is a union of
    /// consecutive classes.
    pub(crate) fn from_ranges(input: &[(u32, u32)]) -> Self {
        let mut events: Vec<(u32, i32)> = Vec::with_capacity(input.len() * 2);
        for &(lo, hi) in input {
            debug_assert!(lo <= hi);
            events.push((lo, 1));
            events.push((hi + 1, -1));
        }
        events.sort_unstable();

        let mut ranges = Vec::new();
        let mut depth = 0i32;
        let mut i = 0;
        while i < events.len() {
            let point = events[i].0;
            while i < events.len() && events[i].0 == point {
                depth += events[i].1;
                i += 1;
            }
            if depth > 0 {
                let next = events[i].0;
                ranges.push((point, next - 1));
            }
        }
        Self { ranges }
    }

    pub(crate) fn from_raw(ranges: Vec<(u32, u32)>) -> Self {
        Self { ranges }
    }

    /// Number of classes including `other`.
    pub fn len(&self) -> usize {
        self.ranges.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn other(&self) -> usize {
        self.ranges.len()
    }

    /// Interval of every non-`other` class, in class order.
    pub fn ranges(&self) -> &[(u32, u32)] {
        &self.ranges
    }

    pub fn class_of(&self, c: char) -> usize {
        let c = c as u32;
        match self.ranges.binary_search_by(|&(lo, hi)| {
            if hi < c {
                std::cmp::Ordering::Less
            } else if lo > c {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        }) {
            Ok(idx) => idx,
            Err(_) => self.other(),
        }
    }

    /// Consecutive class span covering `[lo, hi]`, which must be a union of
    /// classes (true for every range the partition was built from).
    pub(crate) fn span(&self, lo: u32, hi: u32) -> (usize, usize) {
        let first = self.ranges.partition_point(|&(_, h)| h < lo);
        let last = self.ranges.partition_point(|&(l, _)| l <= hi) - 1;
        debug_assert_eq!(self.ranges[first].0, lo);
        debug_assert_eq!(self.ranges[last].1, hi);
        (first, last)
    }
}
