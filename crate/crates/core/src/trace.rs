//! Execution-info data model and its line-oriented textual format.
//!
//! One suite run produces one execution-info file: a sequence of per-test
//! records, each listing the stubbing definitions the test created, the
//! stubbed-method invocations it performed, and the definitions that ended up
//! unnecessary (defined but never invoked within that test).
//!
//! The format is `key:value` lines between fixed block delimiters:
//!
//! ```text
//! test_start
//! test_method_execution_start
//! test_method_class:<class>
//! test_method_name:<name>
//! stub_creation_info_start
//! stubbing_id:<double_class>#<method>#<serial>
//! stubbed_method_class:<class>
//! stubbed_method_name:<method>
//! stubbing_location:<Class>.<method>(<file>:<line>[:<occ>])
//! stack:<file>;<class>;<method>;<line>#<file>;<class>;<method>;<line>...
//! stub_creation_info_end
//! stub_invocation_info_start
//! stubbing_id:...
//! invoked_method_class:<class>
//! invoked_method_name:<method>
//! invocation_location:<file>:<line>[:<occ>]
//! stubbing_location:<Class>.<method>(<file>:<line>[:<occ>])
//! stub_invocation_info_end
//! test_method_execution_end
//! unnecessary_stubbing_info_start
//! ...same keys as a creation block, minus stack...
//! unnecessary_stubbing_info_end
//! test_end
//! ```
//!
//! The serializer emits a canonical ordering (all creation blocks, then all
//! invocation blocks); the parser accepts them interleaved. `:occ` is the
//! 0-based occurrence index distinguishing several stubbing definitions on
//! one physical source line and is omitted when 0.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// A source position in the test suite, the grouping key for analysis.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CodeLocation {
    /// Suite-relative path of the file containing the statement.
    pub file_path: String,
    /// 1-based line number of the statement.
    pub line: u32,
    /// 0-based index among stubbing definitions sharing that line.
    pub occurrence_index: u32,
}

impl CodeLocation {
    pub fn new(file_path: impl Into<String>, line: u32, occurrence_index: u32) -> Self {
        Self {
            file_path: file_path.into(),
            line,
            occurrence_index,
        }
    }

    /// Bare `file:line[:occ]` rendering; `:occ` omitted when 0.
    pub fn render_bare(&self) -> String {
        if self.occurrence_index == 0 {
            format!("{}:{}", self.file_path, self.line)
        } else {
            format!("{}:{}:{}", self.file_path, self.line, self.occurrence_index)
        }
    }
}

impl fmt::Display for CodeLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}",
            self.file_path, self.line, self.occurrence_index
        )
    }
}

/// One frame of the call stack captured when a stubbing was defined,
/// innermost first, truncated at the test or setup entry frame.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StackFrame {
    pub file_path: String,
    pub declaring_class: String,
    pub method_name: String,
    pub line: u32,
}

/// Identifier of one stubbing definition, unique within a suite run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StubbingId {
    pub double_class: String,
    pub method_name: String,
    pub serial: u64,
}

impl fmt::Display for StubbingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}#{}", self.double_class, self.method_name, self.serial)
    }
}

/// A stubbing definition as observed during one test execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StubbingDefinitionEvent {
    pub id: StubbingId,
    pub stubbed_class: String,
    pub stubbed_method: String,
    pub location: CodeLocation,
    /// Innermost-first; `stack[0]` is the frame of the defining statement.
    pub stack: Vec<StackFrame>,
}

/// An invocation of a stubbed method, logged at dispatch time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StubbingInvocationEvent {
    pub id: StubbingId,
    pub invoked_class: String,
    pub invoked_method: String,
    pub call_site: CodeLocation,
    pub definition_location: CodeLocation,
}

/// Everything observed while one test ran.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestExecutionRecord {
    pub test_class: String,
    pub test_name: String,
    pub definitions: Vec<StubbingDefinitionEvent>,
    pub invocations: Vec<StubbingInvocationEvent>,
    pub unnecessary: Vec<StubbingDefinitionEvent>,
}

/// The parsed execution-info file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub records: Vec<TestExecutionRecord>,
}

impl ExecutionTrace {
    /// Iterate (record, definition) pairs in trace order.
    pub fn definition_events(
        &self,
    ) -> impl Iterator<Item = (&TestExecutionRecord, &StubbingDefinitionEvent)> {
        self.records
            .iter()
            .flat_map(|r| r.definitions.iter().map(move |d| (r, d)))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace inconsistency: {0}")]
    Inconsistent(String),
}

impl TraceError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        TraceError::Parse {
            line,
            message: message.into(),
        }
    }
}

/// Returns the definitions whose id appears in no invocation, in definition
/// order. Errors if an invocation references an id not among `definitions`.
pub fn compute_unnecessary(
    definitions: &[StubbingDefinitionEvent],
    invocations: &[StubbingInvocationEvent],
) -> Result<Vec<StubbingDefinitionEvent>, TraceError> {
    let defined: BTreeSet<&StubbingId> = definitions.iter().map(|d| &d.id).collect();
    for inv in invocations {
        if !defined.contains(&inv.id) {
            return Err(TraceError::Inconsistent(format!(
                "invocation of unknown stubbing id {}",
                inv.id
            )));
        }
    }
    let invoked: BTreeSet<&StubbingId> = invocations.iter().map(|i| &i.id).collect();
    Ok(definitions
        .iter()
        .filter(|d| !invoked.contains(&d.id))
        .cloned()
        .collect())
}

// --- serialization ---------------------------------------------------------

fn render_frame_location(frame: &StackFrame, location: &CodeLocation) -> String {
    format!(
        "{}.{}({})",
        frame.declaring_class,
        frame.method_name,
        location.render_bare()
    )
}

fn render_stack(stack: &[StackFrame]) -> String {
    stack
        .iter()
        .map(|f| {
            format!(
                "{};{};{};{}",
                f.file_path, f.declaring_class, f.method_name, f.line
            )
        })
        .collect::<Vec<_>>()
        .join("#")
}

/// Serialize a trace to the exact textual format. Deterministic; the empty
/// trace serializes to the empty string.
pub fn serialize_trace(trace: &ExecutionTrace) -> String {
    let mut out = String::new();
    for record in &trace.records {
        out.push_str("test_start\n");
        out.push_str("test_method_execution_start\n");
        out.push_str(&format!("test_method_class:{}\n", record.test_class));
        out.push_str(&format!("test_method_name:{}\n", record.test_name));
        for def in &record.definitions {
            push_definition_block(&mut out, def, "stub_creation_info", true);
        }
        for inv in &record.invocations {
            let def = record
                .definitions
                .iter()
                .find(|d| d.id == inv.id)
                .expect("invocation id must have a matching definition");
            out.push_str("stub_invocation_info_start\n");
            out.push_str(&format!("stubbing_id:{}\n", inv.id));
            out.push_str(&format!("invoked_method_class:{}\n", inv.invoked_class));
            out.push_str(&format!("invoked_method_name:{}\n", inv.invoked_method));
            out.push_str(&format!(
                "invocation_location:{}\n",
                inv.call_site.render_bare()
            ));
            out.push_str(&format!(
                "stubbing_location:{}\n",
                render_frame_location(&def.stack[0], &inv.definition_location)
            ));
            out.push_str("stub_invocation_info_end\n");
        }
        out.push_str("test_method_execution_end\n");
        for def in &record.unnecessary {
            push_definition_block(&mut out, def, "unnecessary_stubbing_info", false);
        }
        out.push_str("test_end\n");
    }
    out
}

fn push_definition_block(
    out: &mut String,
    def: &StubbingDefinitionEvent,
    delimiter: &str,
    with_stack: bool,
) {
    out.push_str(&format!("{delimiter}_start\n"));
    out.push_str(&format!("stubbing_id:{}\n", def.id));
    out.push_str(&format!("stubbed_method_class:{}\n", def.stubbed_class));
    out.push_str(&format!("stubbed_method_name:{}\n", def.stubbed_method));
    out.push_str(&format!(
        "stubbing_location:{}\n",
        render_frame_location(&def.stack[0], &def.location)
    ));
    if with_stack {
        out.push_str(&format!("stack:{}\n", render_stack(&def.stack)));
    }
    out.push_str(&format!("{delimiter}_end\n"));
}

// --- parsing ---------------------------------------------------------------

struct LineReader<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().collect(),
            pos: 0,
        }
    }

    /// 1-based number of the line about to be read (or just read).
    fn line_no(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<&'a str> {
        let line = self.peek();
        if line.is_some() {
            self.pos += 1;
        }
        line
    }

    fn expect_literal(&mut self, literal: &str) -> Result<(), TraceError> {
        match self.next() {
            Some(line) if line == literal => Ok(()),
            Some(line) => Err(TraceError::at(
                self.pos,
                format!("expected `{literal}`, found `{line}`"),
            )),
            None => Err(TraceError::at(
                self.line_no(),
                format!("expected `{literal}`, found end of input"),
            )),
        }
    }

    fn expect_keyed(&mut self, key: &str) -> Result<&'a str, TraceError> {
        match self.next() {
            Some(line) => match line.strip_prefix(key).and_then(|r| r.strip_prefix(':')) {
                Some(value) => Ok(value),
                None => Err(TraceError::at(
                    self.pos,
                    format!("expected `{key}:` entry, found `{line}`"),
                )),
            },
            None => Err(TraceError::at(
                self.line_no(),
                format!("expected `{key}:` entry, found end of input"),
            )),
        }
    }
}

fn parse_stubbing_id(value: &str, line: usize) -> Result<StubbingId, TraceError> {
    let parts: Vec<&str> = value.split('#').collect();
    if parts.len() != 3 || parts[0].is_empty() || parts[1].is_empty() {
        return Err(TraceError::at(
            line,
            format!("malformed stubbing id `{value}`"),
        ));
    }
    let serial = parts[2]
        .parse::<u64>()
        .map_err(|_| TraceError::at(line, format!("malformed stubbing serial `{}`", parts[2])))?;
    Ok(StubbingId {
        double_class: parts[0].to_string(),
        method_name: parts[1].to_string(),
        serial,
    })
}

fn parse_bare_location(value: &str, line: usize) -> Result<CodeLocation, TraceError> {
    let parts: Vec<&str> = value.split(':').collect();
    let (file, ln, occ) = match parts.as_slice() {
        [file, ln] => (file, ln, None),
        [file, ln, occ] => (file, ln, Some(occ)),
        _ => {
            return Err(TraceError::at(
                line,
                format!("malformed location `{value}`"),
            ))
        }
    };
    if file.is_empty() {
        return Err(TraceError::at(line, format!("empty file in `{value}`")));
    }
    let line_no = ln
        .parse::<u32>()
        .map_err(|_| TraceError::at(line, format!("malformed line number `{ln}`")))?;
    if line_no == 0 {
        return Err(TraceError::at(line, "line numbers are 1-based".to_string()));
    }
    let occurrence_index = match occ {
        Some(o) => {
            let idx = o
                .parse::<u32>()
                .map_err(|_| TraceError::at(line, format!("malformed occurrence index `{o}`")))?;
            if idx == 0 {
                return Err(TraceError::at(
                    line,
                    "occurrence index 0 must be omitted".to_string(),
                ));
            }
            idx
        }
        None => 0,
    };
    Ok(CodeLocation {
        file_path: file.to_string(),
        line: line_no,
        occurrence_index,
    })
}

/// Parses `Class.method(file:line[:occ])` into ((class, method), location).
fn parse_framed_location(
    value: &str,
    line: usize,
) -> Result<((String, String), CodeLocation), TraceError> {
    let open = value
        .find('(')
        .ok_or_else(|| TraceError::at(line, format!("malformed stubbing location `{value}`")))?;
    if !value.ends_with(')') {
        return Err(TraceError::at(
            line,
            format!("malformed stubbing location `{value}`"),
        ));
    }
    let prefix = &value[..open];
    let inner = &value[open + 1..value.len() - 1];
    let dot = prefix.rfind('.').ok_or_else(|| {
        TraceError::at(line, format!("missing method in location `{value}`"))
    })?;
    let class = prefix[..dot].to_string();
    let method = prefix[dot + 1..].to_string();
    if class.is_empty() || method.is_empty() {
        return Err(TraceError::at(
            line,
            format!("malformed stubbing location `{value}`"),
        ));
    }
    Ok(((class, method), parse_bare_location(inner, line)?))
}

fn parse_stack(value: &str, line: usize) -> Result<Vec<StackFrame>, TraceError> {
    let mut frames = Vec::new();
    for chunk in value.split('#') {
        let fields: Vec<&str> = chunk.split(';').collect();
        if fields.len() != 4 || fields.iter().any(|f| f.is_empty()) {
            return Err(TraceError::at(
                line,
                format!("malformed stack frame `{chunk}`"),
            ));
        }
        let frame_line = fields[3]
            .parse::<u32>()
            .map_err(|_| TraceError::at(line, format!("malformed frame line `{}`", fields[3])))?;
        if frame_line == 0 {
            return Err(TraceError::at(line, "line numbers are 1-based".to_string()));
        }
        frames.push(StackFrame {
            file_path: fields[0].to_string(),
            declaring_class: fields[1].to_string(),
            method_name: fields[2].to_string(),
            line: frame_line,
        });
    }
    if frames.is_empty() {
        return Err(TraceError::at(line, "empty stack".to_string()));
    }
    Ok(frames)
}

/// Parse an execution-info file. Strict: malformed delimiters, unknown keys,
/// and cross-referencing mismatches are all errors naming the offending line.
pub fn parse_trace(text: &str) -> Result<ExecutionTrace, TraceError> {
    let mut reader = LineReader::new(text);
    let mut records = Vec::new();
    let mut last_serial: Option<u64> = None;
    let mut seen_tests: BTreeSet<(String, String)> = BTreeSet::new();

    while let Some(line) = reader.peek() {
        if line != "test_start" {
            return Err(TraceError::at(
                reader.line_no(),
                format!("expected `test_start`, found `{line}`"),
            ));
        }
        let record = parse_record(&mut reader, &mut last_serial)?;
        if !seen_tests.insert((record.test_class.clone(), record.test_name.clone())) {
            return Err(TraceError::at(
                reader.pos,
                format!(
                    "duplicate record for test {}#{}",
                    record.test_class, record.test_name
                ),
            ));
        }
        records.push(record);
    }
    Ok(ExecutionTrace { records })
}

fn parse_record(
    reader: &mut LineReader<'_>,
    last_serial: &mut Option<u64>,
) -> Result<TestExecutionRecord, TraceError> {
    reader.expect_literal("test_start")?;
    reader.expect_literal("test_method_execution_start")?;
    let test_class = reader.expect_keyed("test_method_class")?.to_string();
    let test_name = reader.expect_keyed("test_method_name")?.to_string();
    if test_class.is_empty() || test_name.is_empty() {
        return Err(TraceError::at(reader.pos, "empty test identity".to_string()));
    }

    let mut definitions: Vec<StubbingDefinitionEvent> = Vec::new();
    let mut invocations: Vec<StubbingInvocationEvent> = Vec::new();
    loop {
        match reader.peek() {
            Some("stub_creation_info_start") => {
                let def = parse_definition_block(reader, "stub_creation_info", true)?;
                match *last_serial {
                    Some(prev) if def.id.serial <= prev => {
                        return Err(TraceError::at(
                            reader.pos,
                            format!(
                                "stubbing serial {} does not increase (previous {prev})",
                                def.id.serial
                            ),
                        ));
                    }
                    _ => *last_serial = Some(def.id.serial),
                }
                definitions.push(def);
            }
            Some("stub_invocation_info_start") => {
                invocations.push(parse_invocation_block(reader, &definitions)?);
            }
            Some("test_method_execution_end") => {
                reader.next();
                break;
            }
            Some(other) => {
                return Err(TraceError::at(
                    reader.line_no(),
                    format!("unexpected line `{other}` inside test execution"),
                ));
            }
            None => {
                return Err(TraceError::at(
                    reader.line_no(),
                    "unterminated test execution".to_string(),
                ));
            }
        }
    }

    let mut unnecessary = Vec::new();
    loop {
        match reader.peek() {
            Some("unnecessary_stubbing_info_start") => {
                let block_line = reader.line_no();
                let entry = parse_definition_block(reader, "unnecessary_stubbing_info", false)?;
                let def = definitions.iter().find(|d| d.id == entry.id).ok_or_else(|| {
                    TraceError::at(
                        block_line,
                        format!("unnecessary block for undefined stubbing id {}", entry.id),
                    )
                })?;
                if def.stubbed_class != entry.stubbed_class
                    || def.stubbed_method != entry.stubbed_method
                    || def.location != entry.location
                {
                    return Err(TraceError::at(
                        block_line,
                        format!("unnecessary block disagrees with definition of {}", entry.id),
                    ));
                }
                unnecessary.push(def.clone());
            }
            Some("test_end") => {
                reader.next();
                break;
            }
            Some(other) => {
                return Err(TraceError::at(
                    reader.line_no(),
                    format!("unexpected line `{other}` after test execution"),
                ));
            }
            None => {
                return Err(TraceError::at(
                    reader.line_no(),
                    "unterminated test record".to_string(),
                ));
            }
        }
    }

    let expected = compute_unnecessary(&definitions, &invocations)
        .map_err(|e| TraceError::at(reader.pos, e.to_string()))?;
    if expected != unnecessary {
        return Err(TraceError::at(
            reader.pos,
            format!(
                "unnecessary list for test {test_class}#{test_name} does not match \
                 definitions minus invocations"
            ),
        ));
    }

    Ok(TestExecutionRecord {
        test_class,
        test_name,
        definitions,
        invocations,
        unnecessary,
    })
}

fn parse_definition_block(
    reader: &mut LineReader<'_>,
    delimiter: &str,
    with_stack: bool,
) -> Result<StubbingDefinitionEvent, TraceError> {
    reader.expect_literal(&format!("{delimiter}_start"))?;
    let id_value = reader.expect_keyed("stubbing_id")?;
    let id = parse_stubbing_id(id_value, reader.pos)?;
    let stubbed_class = reader.expect_keyed("stubbed_method_class")?.to_string();
    let stubbed_method = reader.expect_keyed("stubbed_method_name")?.to_string();
    let loc_value = reader.expect_keyed("stubbing_location")?;
    let ((frame_class, frame_method), location) = parse_framed_location(loc_value, reader.pos)?;

    let stack = if with_stack {
        let stack_value = reader.expect_keyed("stack")?;
        let stack_line = reader.pos;
        let stack = parse_stack(stack_value, stack_line)?;
        let head = &stack[0];
        if head.file_path != location.file_path || head.line != location.line {
            return Err(TraceError::at(
                stack_line,
                "innermost stack frame does not match stubbing_location".to_string(),
            ));
        }
        if head.declaring_class != frame_class || head.method_name != frame_method {
            return Err(TraceError::at(
                stack_line,
                "stubbing_location prefix does not match innermost stack frame".to_string(),
            ));
        }
        stack
    } else {
        // Unnecessary blocks carry no stack; a placeholder frame is swapped
        // for the defining event's stack by the record validation above.
        vec![StackFrame {
            file_path: location.file_path.clone(),
            declaring_class: frame_class,
            method_name: frame_method,
            line: location.line,
        }]
    };

    reader.expect_literal(&format!("{delimiter}_end"))?;
    Ok(StubbingDefinitionEvent {
        id,
        stubbed_class,
        stubbed_method,
        location,
        stack,
    })
}

fn parse_invocation_block(
    reader: &mut LineReader<'_>,
    definitions: &[StubbingDefinitionEvent],
) -> Result<StubbingInvocationEvent, TraceError> {
    reader.expect_literal("stub_invocation_info_start")?;
    let id_value = reader.expect_keyed("stubbing_id")?;
    let id_line = reader.pos;
    let id = parse_stubbing_id(id_value, id_line)?;
    let invoked_class = reader.expect_keyed("invoked_method_class")?.to_string();
    let invoked_method = reader.expect_keyed("invoked_method_name")?.to_string();
    let call_value = reader.expect_keyed("invocation_location")?;
    let call_site = parse_bare_location(call_value, reader.pos)?;
    let loc_value = reader.expect_keyed("stubbing_location")?;
    let loc_line = reader.pos;
    let (_, definition_location) = parse_framed_location(loc_value, loc_line)?;
    reader.expect_literal("stub_invocation_info_end")?;

    let def = definitions.iter().find(|d| d.id == id).ok_or_else(|| {
        TraceError::at(id_line, format!("invocation of undefined stubbing id {id}"))
    })?;
    if def.location != definition_location {
        return Err(TraceError::at(
            loc_line,
            format!("invocation of {id} names a different definition location"),
        ));
    }
    Ok(StubbingInvocationEvent {
        id,
        invoked_class,
        invoked_method,
        call_site,
        definition_location,
    })
}
