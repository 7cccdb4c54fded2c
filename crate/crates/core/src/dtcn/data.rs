use super::DtcnError;
use crate::context::{ContextKind, ContextSpec, ContextTable};
use crate::dataset::UserPostSequence;
use crate::timebase::{normalized_time_vector, UtcOffset};

/// At most one neighboring and one periodic context spec.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContextSpecs {
    pub ntc: Option<ContextSpec>,
    pub ptc: Option<ContextSpec>,
}

impl ContextSpecs {
    pub fn from_list(specs: &[ContextSpec]) -> Result<Self, DtcnError> {
        let mut out = Self::default();
        for s in specs {
            let slot = match s.kind {
                ContextKind::Neighboring => &mut out.ntc,
                ContextKind::Periodic => &mut out.ptc,
            };
            if slot.is_some() {
                return Err(DtcnError::Config(format!("more than one {} context given", s.kind.code())));
            }
            *slot = Some(*s);
        }
        Ok(out)
    }

    pub fn list(&self) -> Vec<ContextSpec> {
        self.ntc.iter().chain(&self.ptc).copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.ntc.is_none() && self.ptc.is_none()
    }
}

/// A sequence with everything the model reads precomputed: context members
/// of every record, normalized time vectors and popularity.
#[derive(Debug, Clone)]
pub struct PreparedData<'a> {
    pub seq: &'a UserPostSequence,
    pub offset: UtcOffset,
    pub specs: ContextSpecs,
    /// Neighboring then periodic.
    pub(crate) tables: [Option<ContextTable>; 2],
    pub(crate) time_vectors: Vec<[f64; 4]>,
    pub(crate) popularity: Vec<f64>,
}

impl<'a> PreparedData<'a> {
    pub fn new(seq: &'a UserPostSequence, offset: UtcOffset, specs: ContextSpecs) -> Self {
        let tables = [
            specs.ntc.map(|s| ContextTable::build(seq, s, offset)),
            specs.ptc.map(|s| ContextTable::build(seq, s, offset)),
        ];
        let time_vectors = seq
            .records()
            .iter()
            .map(|r| normalized_time_vector(&offset.calendar(r.timestamp).time_vector()))
            .collect();
        Self {
            seq,
            offset,
            specs,
            tables,
            time_vectors,
            popularity: seq.popularities(),
        }
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    pub fn popularity(&self, i: usize) -> f64 {
        self.popularity[i]
    }

    /// Context members of `target` for stream 0 (neighboring) or 1
    /// (periodic); empty when that stream is not configured.
    pub fn context(&self, stream: usize, target: usize) -> &[usize] {
        self.tables[stream].as_ref().map_or(&[], |t| t.get(target))
    }
}
