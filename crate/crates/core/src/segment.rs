//! Fixed-length segments with halos.
//!
//! Segment `i` of a series covers the core `[i*core_len, (i+1)*core_len)`
//! plus `halo` positions on each side. Positions outside the series hold
//! `Unknown`, so the last segment is padded with `?`. A window of size `w`
//! is computable from one segment alone when `w - 1 <= halo`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use chrono::DateTime;

use crate::algebra::{window_values, WindowFn};
use crate::{Calendar, Error, Granularity, Result, TimeSeries, Timestamp, TsValue};

pub const WIRE_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SegmentSpec {
    pub core_len: usize,
    pub halo: usize,
}

impl Default for SegmentSpec {
    fn default() -> Self {
        SegmentSpec {
            core_len: 1024,
            halo: 128,
        }
    }
}

impl SegmentSpec {
    pub fn new(core_len: usize, halo: usize) -> Result<Self> {
        let spec = SegmentSpec { core_len, halo };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.core_len < 1 || self.halo > self.core_len || self.core_len > u32::MAX as usize {
            return Err(Error::Config(format!(
                "segment spec needs core_len >= 1 and halo <= core_len, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn total_len(&self) -> usize {
        self.core_len + 2 * self.halo
    }

    /// Number of segments for a series of `n` values.
    pub fn segment_count(&self, n: usize) -> u64 {
        n.div_ceil(self.core_len) as u64
    }

    /// Global index of the first core position of segment `i`.
    pub fn core_start(&self, i: u64) -> i64 {
        i as i64 * self.core_len as i64
    }

    pub fn segment_of(&self, global: usize) -> u64 {
        (global / self.core_len) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub series_name: String,
    pub seg_index: u64,
    pub spec: SegmentSpec,
    /// Timestamp of the first (left-halo) position.
    pub start: Timestamp,
    pub granularity: Granularity,
    /// `halo + core_len + halo` values.
    pub values: Vec<TsValue>,
}

impl Segment {
    pub fn core(&self) -> &[TsValue] {
        &self.values[self.spec.halo..self.spec.halo + self.spec.core_len]
    }

    /// Calendar of the whole segment buffer, halos included.
    pub fn buffer_calendar(&self) -> Calendar {
        Calendar::new(self.start, self.granularity, self.values.len())
    }

    /// Calendar positioned at global index 0 of the series.
    pub fn series_origin(&self) -> Calendar {
        let cal = self.buffer_calendar();
        let offset = self.spec.halo as i64 - self.spec.core_start(self.seg_index);
        Calendar::new(cal.time_at(offset), self.granularity, 0)
    }

    pub fn core_start_time(&self) -> Timestamp {
        self.buffer_calendar().time_at(self.spec.halo as i64)
    }

    pub fn core_end_time(&self) -> Timestamp {
        self.buffer_calendar()
            .time_at((self.spec.halo + self.spec.core_len) as i64 - 1)
    }

    /// Buffer index of the true series start, present only in segment 0.
    pub fn origin(&self) -> Option<usize> {
        (self.seg_index == 0).then_some(self.spec.halo)
    }

    /// Same position layout, new name and values.
    pub fn derive(&self, series_name: String, values: Vec<TsValue>) -> Segment {
        debug_assert_eq!(values.len(), self.values.len());
        Segment {
            series_name,
            seg_index: self.seg_index,
            spec: self.spec,
            start: self.start,
            granularity: self.granularity,
            values,
        }
    }

    pub fn encoded_len(&self) -> usize {
        let reals = self.values.iter().filter(|v| v.is_real()).count();
        HEADER_FIXED + self.series_name.len() + self.values.len() + 8 * reals
    }

    /// Wire encoding: header then one tag byte per value (0 real, 1 empty,
    /// 2 unknown), reals followed by 8 big-endian IEEE-754 bytes. All
    /// integers are big-endian.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.push(WIRE_VERSION);
        out.extend_from_slice(&(self.series_name.len() as u32).to_be_bytes());
        out.extend_from_slice(self.series_name.as_bytes());
        out.extend_from_slice(&self.seg_index.to_be_bytes());
        out.extend_from_slice(&(self.spec.core_len as u32).to_be_bytes());
        out.extend_from_slice(&(self.spec.halo as u32).to_be_bytes());
        let utc = self.start.and_utc();
        out.extend_from_slice(&utc.timestamp().to_be_bytes());
        out.extend_from_slice(&utc.timestamp_subsec_nanos().to_be_bytes());
        out.push(self.granularity.code());
        out.extend_from_slice(&(self.values.len() as u32).to_be_bytes());
        for v in &self.values {
            match v {
                TsValue::Real(x) => {
                    out.push(0);
                    out.extend_from_slice(&x.to_be_bytes());
                }
                TsValue::Empty => out.push(1),
                TsValue::Unknown => out.push(2),
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Segment> {
        let mut r = Reader { bytes, at: 0 };
        let version = r.u8()?;
        if version != WIRE_VERSION {
            return Err(Error::Decode(format!("unsupported version {version}")));
        }
        let name_len = r.u32()? as usize;
        let series_name = core::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Decode("series name is not UTF-8".into()))?
            .into();
        let seg_index = r.u64()?;
        let core_len = r.u32()? as usize;
        let halo = r.u32()? as usize;
        let spec = SegmentSpec::new(core_len, halo).map_err(|e| Error::Decode(format!("{e}")))?;
        let secs = r.u64()? as i64;
        let nanos = r.u32()?;
        let start = DateTime::from_timestamp(secs, nanos)
            .ok_or_else(|| Error::Decode("timestamp out of range".into()))?
            .naive_utc();
        let granularity = Granularity::from_code(r.u8()?)
            .ok_or_else(|| Error::Decode("bad granularity code".into()))?;
        let count = r.u32()? as usize;
        if count != spec.total_len() {
            return Err(Error::Decode(format!(
                "value count {count} does not match spec {spec:?}"
            )));
        }
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(match r.u8()? {
                0 => {
                    let x = f64::from_be_bytes(r.take(8)?.try_into().expect("8 bytes"));
                    if !x.is_finite() {
                        return Err(Error::Decode("non-finite real".into()));
                    }
                    TsValue::Real(x)
                }
                1 => TsValue::Empty,
                2 => TsValue::Unknown,
                t => return Err(Error::Decode(format!("bad value tag {t}"))),
            });
        }
        if r.at != bytes.len() {
            return Err(Error::Decode("trailing bytes".into()));
        }
        Ok(Segment {
            series_name,
            seg_index,
            spec,
            start,
            granularity,
            values,
        })
    }
}

// version, name length, seg_index, core_len, halo, secs, nanos, granularity, count
const HEADER_FIXED: usize = 1 + 4 + 8 + 4 + 4 + 8 + 4 + 1 + 4;

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Decode("truncated segment".into()))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

/// Cuts segment `i` out of `s`.
pub fn segment_at(s: &TimeSeries, name: &str, spec: SegmentSpec, i: u64) -> Segment {
    let first = spec.core_start(i) - spec.halo as i64;
    let n = s.len() as i64;
    let values = (first..first + spec.total_len() as i64)
        .map(|g| {
            if (0..n).contains(&g) {
                s.values()[g as usize]
            } else {
                TsValue::Unknown
            }
        })
        .collect();
    Segment {
        series_name: name.into(),
        seg_index: i,
        spec,
        start: s.calendar().time_at(first),
        granularity: s.calendar().granularity,
        values,
    }
}

/// Splits `s` into `ceil(n / core_len)` segments.
pub fn segment(s: &TimeSeries, name: &str, spec: SegmentSpec) -> Result<Vec<Segment>> {
    spec.validate()?;
    Ok((0..spec.segment_count(s.len()))
        .map(|i| segment_at(s, name, spec, i))
        .collect())
}

/// Inclusive range of global indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexInterval {
    pub first: usize,
    pub last: usize,
}

impl IndexInterval {
    pub fn new(first: usize, last: usize) -> Self {
        IndexInterval { first, last }
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Segment indices whose cores intersect the interval.
    pub fn segments(&self, spec: SegmentSpec) -> core::ops::RangeInclusive<u64> {
        spec.segment_of(self.first)..=spec.segment_of(self.last)
    }
}

/// Concatenates the cores covering `interval` and clips to it.
pub fn assemble(segs: &[Segment], interval: IndexInterval) -> Result<TimeSeries> {
    if interval.last < interval.first {
        return Err(Error::Config(format!("empty interval {interval:?}")));
    }
    let Some(head) = segs.first() else {
        return Err(Error::Gap(
            interval.segments(SegmentSpec::default()).collect(),
        ));
    };
    for s in segs {
        if s.spec != head.spec || s.series_name != head.series_name {
            return Err(Error::SpecMismatch(format!(
                "{}#{} {:?} vs {}#{} {:?}",
                s.series_name, s.seg_index, s.spec, head.series_name, head.seg_index, head.spec
            )));
        }
    }
    let spec = head.spec;
    let needed = interval.segments(spec);
    let mut by_index: Vec<Option<&Segment>> =
        vec![None; (needed.end() - needed.start() + 1) as usize];
    for s in segs {
        if needed.contains(&s.seg_index) {
            let slot = &mut by_index[(s.seg_index - needed.start()) as usize];
            slot.get_or_insert(s);
        }
    }
    let missing: Vec<u64> = needed
        .clone()
        .filter(|i| by_index[(i - needed.start()) as usize].is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Gap(missing));
    }
    let mut values = Vec::with_capacity(interval.len());
    for g in interval.first..=interval.last {
        let seg = by_index[(spec.segment_of(g) - needed.start()) as usize].expect("checked");
        values.push(seg.core()[g % spec.core_len]);
    }
    let origin = head.series_origin();
    let calendar = origin.slice(interval.first as i64, interval.len());
    TimeSeries::new(calendar, values)
}

/// True iff a window of `w` items ending at any core position stays inside
/// the segment.
pub fn locally_computable(spec: SegmentSpec, w: usize) -> bool {
    w.saturating_sub(1) <= spec.halo
}

/// Applies `WIN_fun(., w)` to one segment. Core positions equal the
/// centralized result; halo positions whose window leaves the buffer are
/// `Unknown`. The series-start rule applies only in segment 0.
pub fn window_on_segment(seg: &Segment, w: usize, fun: &WindowFn) -> Result<Segment> {
    if w < 1 {
        return Err(Error::BadWindow(w));
    }
    if !locally_computable(seg.spec, w) {
        return Err(Error::HaloTooSmall {
            lookback: w - 1,
            halo: seg.spec.halo,
        });
    }
    let values = window_values(&seg.values, w, seg.origin(), |items| fun.apply(items));
    Ok(seg.derive(seg.series_name.clone(), values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use TsValue::{Real, Unknown};

    fn ramp(n: usize) -> TimeSeries {
        let start = NaiveDate::from_ymd_opt(1990, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let vals: Vec<f64> = (0..n)
            .map(|i| (i as f64 * 0.37).sin() * 50.0 + i as f64)
            .collect();
        TimeSeries::from_reals(Calendar::new(start, Granularity::Day, n), &vals).unwrap()
    }

    fn full(n: usize) -> IndexInterval {
        IndexInterval::new(0, n - 1)
    }

    #[test]
    fn two_full_segments() {
        let s = ramp(2048);
        let segs = segment(&s, "S", SegmentSpec::default()).unwrap();
        assert_eq!(segs.len(), 2);
        assert!(segs[0].values[..128].iter().all(|v| *v == Unknown));
        assert!(segs[1].values[128 + 1024..].iter().all(|v| *v == Unknown));
        assert_eq!(segs[0].values.len(), 1280);
    }

    #[test]
    fn single_value_is_padded() {
        let segs = segment(&ramp(1), "S", SegmentSpec::default()).unwrap();
        assert_eq!(segs.len(), 1);
        let reals = segs[0].values.iter().filter(|v| v.is_real()).count();
        assert_eq!(reals, 1);
        assert_eq!(segs[0].values.len() - reals, 1279);
    }

    #[test]
    fn adjacent_segments_share_overlap() {
        let spec = SegmentSpec::new(100, 20).unwrap();
        let segs = segment(&ramp(450), "S", spec).unwrap();
        for pair in segs.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            // a's last 2*halo positions are b's first 2*halo positions.
            assert_eq!(&a.values[100..140], &b.values[..40]);
        }
    }

    #[test]
    fn assemble_round_trip_gap_and_slices() {
        let s = ramp(2500);
        let spec = SegmentSpec::default();
        let segs = segment(&s, "S", spec).unwrap();
        assert_eq!(assemble(&segs, full(2500)).unwrap(), s);

        let partial = [segs[0].clone(), segs[2].clone()];
        assert_eq!(
            assemble(&partial, full(2500)),
            Err(Error::Gap(alloc::vec![1]))
        );

        let inner = assemble(&segs[1..2], IndexInterval::new(1100, 1200)).unwrap();
        assert_eq!(inner, s.slice(1100, 1201));
    }

    #[test]
    fn assemble_rejects_mixed_specs() {
        let s = ramp(300);
        let a = segment(&s, "S", SegmentSpec::new(100, 10).unwrap()).unwrap();
        let b = segment(&s, "S", SegmentSpec::new(100, 20).unwrap()).unwrap();
        let mixed = [a[0].clone(), b[1].clone()];
        assert!(matches!(
            assemble(&mixed, full(200)),
            Err(Error::SpecMismatch(_))
        ));
    }

    #[test]
    fn local_computability_boundary() {
        let spec = SegmentSpec::default();
        assert!(locally_computable(spec, 100));
        assert!(locally_computable(spec, 129));
        assert!(!locally_computable(spec, 130));
    }

    #[test]
    fn per_segment_windows_match_centralized() {
        let s = ramp(5000);
        let spec = SegmentSpec::new(512, 64).unwrap();
        let central = algebra::window(&s, 50, &WindowFn::Avg).unwrap();
        let segs: Vec<Segment> = segment(&s, "S", spec)
            .unwrap()
            .iter()
            .map(|seg| window_on_segment(seg, 50, &WindowFn::Avg).unwrap())
            .collect();
        let local = assemble(&segs, full(5000)).unwrap();
        assert_eq!(local, central);
        // segment 0 reproduces the start-of-series duplication
        assert_eq!(&segs[0].core()[..49], &central.values()[..49]);

        let unit = window_on_segment(&segs[3], 1, &WindowFn::Last).unwrap();
        assert_eq!(unit.core(), segs[3].core());

        assert_eq!(
            window_on_segment(&segs[1], 66, &WindowFn::Avg),
            Err(Error::HaloTooSmall {
                lookback: 65,
                halo: 64
            })
        );
    }

    #[test]
    fn wire_encoding_round_trips_bit_exactly() {
        let mut seg = segment_at(&ramp(10), "MAVG(S,3)", SegmentSpec::new(4, 2).unwrap(), 1);
        seg.values[0] = TsValue::Empty;
        seg.values[1] = Real(-0.0);
        let bytes = seg.encode();
        assert_eq!(bytes.len(), seg.encoded_len());
        let back = Segment::decode(&bytes).unwrap();
        assert_eq!(back.encode(), bytes);
        assert_eq!(back, seg);
        assert!(Segment::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = 9;
        assert!(Segment::decode(&bad).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_for_any_size(n in 1usize..3000, core in 1usize..600, halo_frac in 0usize..=100) {
            let halo = core * halo_frac / 100;
            let spec = SegmentSpec::new(core, halo).unwrap();
            let s = ramp(n);
            let segs = segment(&s, "S", spec).unwrap();
            prop_assert_eq!(segs.len() as u64, spec.segment_count(n));
            prop_assert_eq!(assemble(&segs, full(n)).unwrap(), s.clone());
            let padded = segs.len() * core;
            let unknown_cores: usize = segs
                .iter()
                .map(|g| g.core().iter().filter(|v| **v == Unknown).count())
                .sum();
            prop_assert_eq!(unknown_cores, padded - n);
            prop_assert_eq!(segment(&s, "S", spec).unwrap(), segs);
        }

        #[test]
        fn exact_multiples_and_one_past(k in 1usize..5, core in 1usize..200) {
            let spec = SegmentSpec::new(core, core / 2).unwrap();
            for n in [k * core, k * core + 1] {
                let s = ramp(n);
                prop_assert_eq!(assemble(&segment(&s, "S", spec).unwrap(), full(n)).unwrap(), s);
            }
        }
    }
}
