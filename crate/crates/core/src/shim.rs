//! Reference stubbing harness: test doubles, stubbing definition, invocation
//! interception, and per-test trace emission.
//!
//! The harness is generic over the stubbed value type so the suite
//! interpreter can plug its own runtime values in. Unstubbed methods yield
//! the value type's default (`V::default()`), mirroring doubles whose
//! methods have empty implementations. The harness only records unnecessary
//! stubbings; it never fails a test because of them.
//!
//! Records are appended to the execution-info file at the path given by the
//! `STUBSCRUB_TRACE_PATH` environment variable (or an explicit path), one
//! complete record per finished test.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::trace::{
    compute_unnecessary, serialize_trace, CodeLocation, ExecutionTrace, StackFrame,
    StubbingDefinitionEvent, StubbingId, StubbingInvocationEvent, TestExecutionRecord, TraceError,
};

/// Environment key naming the execution-info file the harness appends to.
pub const TRACE_PATH_ENV: &str = "STUBSCRUB_TRACE_PATH";

/// Opaque handle to a test double owned by the current session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DoubleHandle(usize);

#[derive(Debug, Error)]
pub enum ShimError {
    #[error("no open test session")]
    NoSession,
    #[error("a test session is already open ({0}#{1})")]
    SessionOpen(String, String),
    #[error("unknown double handle")]
    UnknownDouble,
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("cannot write trace to {path}: {source}")]
    TraceIo {
        path: PathBuf,
        source: std::io::Error,
    },
}

struct DoubleState<V> {
    double_class: String,
    // Last write wins: redefining a method replaces the table entry, and
    // later invocations are attributed to the latest StubbingId.
    table: HashMap<String, (StubbingId, V)>,
}

struct SessionState<V> {
    test_class: String,
    test_name: String,
    doubles: Vec<DoubleState<V>>,
    definitions: Vec<StubbingDefinitionEvent>,
    invocations: Vec<StubbingInvocationEvent>,
}

/// Where finished records go.
pub enum TraceSink {
    /// Append serialized records to a file (created or truncated up front).
    File(PathBuf),
    /// Keep records in memory only.
    Memory,
    /// Drop records.
    Discard,
}

impl TraceSink {
    /// Sink taken from `STUBSCRUB_TRACE_PATH`, or in-memory when unset.
    pub fn from_env() -> Self {
        match std::env::var(TRACE_PATH_ENV) {
            Ok(path) if !path.is_empty() => TraceSink::File(PathBuf::from(path)),
            _ => TraceSink::Memory,
        }
    }
}

/// One suite run's worth of stubbing state: a monotone serial counter, the
/// trace sink, and at most one open test session.
pub struct Harness<V> {
    sink: TraceSink,
    next_serial: u64,
    session: Option<SessionState<V>>,
    collected: Vec<TestExecutionRecord>,
}

impl<V: Clone + Default> Harness<V> {
    pub fn new(sink: TraceSink) -> Result<Self, ShimError> {
        if let TraceSink::File(path) = &sink {
            // Truncate so one harness equals one suite run.
            std::fs::write(path, b"").map_err(|source| ShimError::TraceIo {
                path: path.clone(),
                source,
            })?;
        }
        Ok(Self {
            sink,
            next_serial: 1,
            session: None,
            collected: Vec::new(),
        })
    }

    /// Open a session for one test. Nesting is a lifecycle error.
    pub fn begin_test(&mut self, test_class: &str, test_name: &str) -> Result<(), ShimError> {
        if let Some(open) = &self.session {
            return Err(ShimError::SessionOpen(
                open.test_class.clone(),
                open.test_name.clone(),
            ));
        }
        self.session = Some(SessionState {
            test_class: test_class.to_string(),
            test_name: test_name.to_string(),
            doubles: Vec::new(),
            definitions: Vec::new(),
            invocations: Vec::new(),
        });
        Ok(())
    }

    /// Close the session: compute unnecessary stubbings, append the record
    /// to the trace, and return it.
    pub fn end_test(&mut self) -> Result<TestExecutionRecord, ShimError> {
        let session = self.session.take().ok_or(ShimError::NoSession)?;
        let unnecessary = compute_unnecessary(&session.definitions, &session.invocations)?;
        let record = TestExecutionRecord {
            test_class: session.test_class,
            test_name: session.test_name,
            definitions: session.definitions,
            invocations: session.invocations,
            unnecessary,
        };
        if let TraceSink::File(path) = &self.sink {
            append_record(path, &record)?;
        }
        if !matches!(self.sink, TraceSink::Discard) {
            self.collected.push(record.clone());
        }
        Ok(record)
    }

    /// Create a fresh double of the named type. Its methods return the
    /// neutral default until stubbed.
    pub fn create_double(&mut self, type_name: &str) -> Result<DoubleHandle, ShimError> {
        let session = self.session.as_mut().ok_or(ShimError::NoSession)?;
        session.doubles.push(DoubleState {
            double_class: type_name.to_string(),
            table: HashMap::new(),
        });
        Ok(DoubleHandle(session.doubles.len() - 1))
    }

    /// Record a stubbing definition and install it on the double.
    /// Redefinition is legal; both definitions are logged.
    pub fn define_stubbing(
        &mut self,
        double: DoubleHandle,
        method_name: &str,
        return_value: V,
        caller: CodeLocation,
        stack: Vec<StackFrame>,
    ) -> Result<StubbingId, ShimError> {
        let serial = self.next_serial;
        let session = self.session.as_mut().ok_or(ShimError::NoSession)?;
        let state = session
            .doubles
            .get_mut(double.0)
            .ok_or(ShimError::UnknownDouble)?;
        let id = StubbingId {
            double_class: state.double_class.clone(),
            method_name: method_name.to_string(),
            serial,
        };
        self.next_serial += 1;
        debug_assert!(!stack.is_empty(), "definition stack must not be empty");
        session.definitions.push(StubbingDefinitionEvent {
            id: id.clone(),
            stubbed_class: state.double_class.clone(),
            stubbed_method: method_name.to_string(),
            location: caller,
            stack,
        });
        state
            .table
            .insert(method_name.to_string(), (id.clone(), return_value));
        Ok(id)
    }

    /// Intercept a method call on a double. Stubbed methods log an
    /// invocation event and return the stubbed value; unstubbed methods
    /// return the neutral default and log nothing.
    pub fn dispatch(
        &mut self,
        double: DoubleHandle,
        method_name: &str,
        call_site: CodeLocation,
    ) -> Result<V, ShimError> {
        let session = self.session.as_mut().ok_or(ShimError::NoSession)?;
        let state = session
            .doubles
            .get(double.0)
            .ok_or(ShimError::UnknownDouble)?;
        match state.table.get(method_name) {
            Some((id, value)) => {
                let definition_location = session
                    .definitions
                    .iter()
                    .find(|d| d.id == *id)
                    .map(|d| d.location.clone())
                    .expect("table entry always has a logged definition");
                session.invocations.push(StubbingInvocationEvent {
                    id: id.clone(),
                    invoked_class: state.double_class.clone(),
                    invoked_method: method_name.to_string(),
                    call_site,
                    definition_location,
                });
                Ok(value.clone())
            }
            None => Ok(V::default()),
        }
    }

    /// Declared type of a double, as passed to [`Harness::create_double`].
    pub fn double_class(&self, double: DoubleHandle) -> Result<&str, ShimError> {
        let session = self.session.as_ref().ok_or(ShimError::NoSession)?;
        session
            .doubles
            .get(double.0)
            .map(|d| d.double_class.as_str())
            .ok_or(ShimError::UnknownDouble)
    }

    pub fn has_open_session(&self) -> bool {
        self.session.is_some()
    }

    /// All records finished so far, in execution order.
    pub fn collected_trace(&self) -> ExecutionTrace {
        ExecutionTrace {
            records: self.collected.clone(),
        }
    }
}

fn append_record(path: &Path, record: &TestExecutionRecord) -> Result<(), ShimError> {
    let text = serialize_trace(&ExecutionTrace {
        records: vec![record.clone()],
    });
    let mut file = OpenOptions::new()
        .append(true)
        .create(true)
        .open(path)
        .map_err(|source| ShimError::TraceIo {
            path: path.to_path_buf(),
            source,
        })?;
    file.write_all(text.as_bytes())
        .map_err(|source| ShimError::TraceIo {
            path: path.to_path_buf(),
            source,
        })
}
