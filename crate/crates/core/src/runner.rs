//! Executes a test suite under the stubbing harness.
//!
//! Each test runs in isolation: fields reset, setup methods, the test body,
//! then teardown methods, with one harness session wrapped around the whole
//! lifecycle. Assertion failures and runtime faults mark the test failed but
//! never abort the suite; the execution record is emitted either way.
//!
//! Tests of a `@Params(...)` class run once per parameter value, named
//! `test[0]`, `test[1]`, ... in the trace, with the value bound to `param`.

use std::collections::HashMap;
use std::fmt;

use crate::lang::ast::*;
use crate::shim::{DoubleHandle, Harness, ShimError, TraceSink};
use crate::suite::{ClassRef, MemberRef, MethodRole, TestSuiteModel};
use crate::trace::{CodeLocation, ExecutionTrace, StackFrame};

const STEP_BUDGET: u64 = 200_000;
const CALL_DEPTH_LIMIT: usize = 128;

/// Runtime value of the test language. `Null` is the neutral default an
/// unstubbed double method yields.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum Value {
    #[default]
    Null,
    Bool(bool),
    Int(i64),
    Str(String),
    List(Vec<Value>),
    Double(DoubleHandle),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => write!(f, "null"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Str(s) => write!(f, "{s}"),
            Value::List(items) => {
                write!(f, "[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
            Value::Double(_) => write!(f, "<double>"),
        }
    }
}

impl From<&Literal> for Value {
    fn from(lit: &Literal) -> Self {
        match lit {
            Literal::Int(v) => Value::Int(*v),
            Literal::Str(s) => Value::Str(s.clone()),
            Literal::Bool(b) => Value::Bool(*b),
        }
    }
}

/// Outcome of one executed test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestOutcome {
    pub test_class: String,
    pub test_name: String,
    pub failure: Option<String>,
}

impl TestOutcome {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub outcomes: Vec<TestOutcome>,
    pub trace: ExecutionTrace,
}

impl SuiteRun {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed())
    }

    pub fn failures(&self) -> Vec<&TestOutcome> {
        self.outcomes.iter().filter(|o| !o.passed()).collect()
    }
}

/// Run every test in the suite, appending records to `sink`.
pub fn run_suite(model: &TestSuiteModel, sink: TraceSink) -> Result<SuiteRun, ShimError> {
    let mut harness: Harness<Value> = Harness::new(sink)?;
    let mut outcomes = Vec::new();
    for (class_ref, test_ref) in model.test_plan() {
        let test_name = model.member(test_ref).name().to_string();
        let params = model.params_of(class_ref);
        if params.is_empty() {
            outcomes.push(run_one(
                model, &mut harness, class_ref, test_ref, &test_name, None,
            )?);
        } else {
            for (idx, lit) in params.iter().enumerate() {
                let decorated = format!("{test_name}[{idx}]");
                outcomes.push(run_one(
                    model,
                    &mut harness,
                    class_ref,
                    test_ref,
                    &decorated,
                    Some(Value::from(lit)),
                )?);
            }
        }
    }
    Ok(SuiteRun {
        outcomes,
        trace: harness.collected_trace(),
    })
}

fn run_one(
    model: &TestSuiteModel,
    harness: &mut Harness<Value>,
    class_ref: ClassRef,
    test_ref: MemberRef,
    decorated_name: &str,
    param: Option<Value>,
) -> Result<TestOutcome, ShimError> {
    let class = model.class_decl(class_ref);
    harness.begin_test(&class.name, decorated_name)?;

    let mut fields = HashMap::new();
    for member in &class.members {
        if let MemberKind::Field(field) = &member.kind {
            fields.insert(field.name.clone(), Value::Null);
        }
    }

    let mut interp = Interp {
        model,
        harness,
        class_ref,
        fields,
        frames: Vec::new(),
        steps: 0,
        param,
    };

    let mut failure: Option<String> = None;
    for (setup_ref, _) in model.members_with_role(class_ref, MethodRole::Setup) {
        if failure.is_none() {
            failure = interp.run_method(setup_ref, Vec::new()).err();
        }
    }
    if failure.is_none() {
        failure = interp.run_method(test_ref, Vec::new()).err();
    }
    // Teardown runs even after a failure; its own failure is reported only
    // when the test was otherwise green.
    for (teardown_ref, _) in model.members_with_role(class_ref, MethodRole::Teardown) {
        let result = interp.run_method(teardown_ref, Vec::new());
        if failure.is_none() {
            failure = result.err();
        }
    }

    interp.harness.end_test()?;
    Ok(TestOutcome {
        test_class: class.name.clone(),
        test_name: decorated_name.to_string(),
        failure,
    })
}

enum Flow {
    Normal,
    Return(Value),
}

struct Frame {
    method_name: String,
    line: u32,
    scopes: Vec<HashMap<String, Value>>,
}

struct Interp<'a, 'h> {
    model: &'a TestSuiteModel,
    harness: &'h mut Harness<Value>,
    class_ref: ClassRef,
    fields: HashMap<String, Value>,
    frames: Vec<Frame>,
    steps: u64,
    param: Option<Value>,
}

impl<'a, 'h> Interp<'a, 'h> {
    fn class(&self) -> &'a ClassDecl {
        self.model.class_decl(self.class_ref)
    }

    fn rel_path(&self) -> &'a str {
        &self.model.file(self.class_ref.file).rel_path
    }

    fn fail(&self, line: u32, message: impl Into<String>) -> String {
        format!("{}:{line}: {}", self.rel_path(), message.into())
    }

    fn location(&self, line: u32, occurrence_index: u32) -> CodeLocation {
        CodeLocation::new(self.rel_path(), line, occurrence_index)
    }

    /// Innermost-first snapshot of the interpreter call stack.
    fn stack_snapshot(&self) -> Vec<StackFrame> {
        self.frames
            .iter()
            .rev()
            .map(|f| StackFrame {
                file_path: self.rel_path().to_string(),
                declaring_class: self.class().name.clone(),
                method_name: f.method_name.clone(),
                line: f.line,
            })
            .collect()
    }

    fn run_method(&mut self, member_ref: MemberRef, args: Vec<Value>) -> Result<Value, String> {
        let method = self.model.method(member_ref);
        if self.frames.len() >= CALL_DEPTH_LIMIT {
            let line = self.frames.last().map(|f| f.line).unwrap_or(1);
            return Err(self.fail(line, format!("call depth limit in `{}`", method.name)));
        }
        if args.len() != method.params.len() {
            let line = self.frames.last().map(|f| f.line).unwrap_or(method.body.span.start as u32);
            return Err(self.fail(
                line,
                format!(
                    "`{}` takes {} arguments, got {}",
                    method.name,
                    method.params.len(),
                    args.len()
                ),
            ));
        }
        let mut scope = HashMap::new();
        for (param, value) in method.params.iter().zip(args) {
            scope.insert(param.name.clone(), value);
        }
        self.frames.push(Frame {
            method_name: method.name.clone(),
            line: method.body.span.start as u32,
            scopes: vec![scope],
        });
        let flow = self.exec_block(&method.body);
        self.frames.pop();
        match flow? {
            Flow::Return(value) => Ok(value),
            Flow::Normal => Ok(Value::Null),
        }
    }

    fn exec_block(&mut self, block: &Block) -> Result<Flow, String> {
        self.frames.last_mut().unwrap().scopes.push(HashMap::new());
        let mut flow = Flow::Normal;
        for stmt in &block.stmts {
            match self.exec_stmt(stmt)? {
                Flow::Normal => {}
                ret => {
                    flow = ret;
                    break;
                }
            }
        }
        self.frames.last_mut().unwrap().scopes.pop();
        Ok(flow)
    }

    fn exec_stmt(&mut self, stmt: &Stmt) -> Result<Flow, String> {
        self.steps += 1;
        if self.steps > STEP_BUDGET {
            return Err(self.fail(stmt.line, "step budget exhausted (runaway loop?)"));
        }
        self.frames.last_mut().unwrap().line = stmt.line;
        match &stmt.kind {
            StmtKind::VarDecl { name, init, .. } => {
                let value = self.eval(init)?;
                let scope = self.frames.last_mut().unwrap().scopes.last_mut().unwrap();
                if scope.contains_key(name) {
                    return Err(self.fail(stmt.line, format!("`{name}` already declared")));
                }
                scope.insert(name.clone(), value);
                Ok(Flow::Normal)
            }
            StmtKind::Assign { name, value } => {
                let value = self.eval(value)?;
                self.assign(name, value, stmt.line)?;
                Ok(Flow::Normal)
            }
            StmtKind::When(w) => {
                let target = self.eval(&w.target)?;
                let handle = match target {
                    Value::Double(handle) => handle,
                    other => {
                        return Err(self.fail(
                            stmt.line,
                            format!("stubbing target is `{other}`, not a test double"),
                        ))
                    }
                };
                let value = self.eval(&w.value)?;
                // The statement line is the definition location; frame lines
                // already hold the call chain.
                self.frames.last_mut().unwrap().line = stmt.line;
                let location = self.location(stmt.line, w.occurrence_index);
                let stack = self.stack_snapshot();
                self.harness
                    .define_stubbing(handle, &w.method, value, location, stack)
                    .map_err(|e| self.fail(stmt.line, e.to_string()))?;
                Ok(Flow::Normal)
            }
            StmtKind::Expr(expr) => {
                self.eval(expr)?;
                Ok(Flow::Normal)
            }
            StmtKind::Return(value) => {
                let value = match value {
                    Some(expr) => self.eval(expr)?,
                    None => Value::Null,
                };
                Ok(Flow::Return(value))
            }
            StmtKind::If {
                cond,
                then_block,
                else_branch,
            } => {
                if self.truthy(cond)? {
                    self.exec_block(then_block)
                } else {
                    match else_branch {
                        Some(ElseBranch::Else(block)) => self.exec_block(block),
                        Some(ElseBranch::ElseIf(nested)) => self.exec_stmt(nested),
                        None => Ok(Flow::Normal),
                    }
                }
            }
            StmtKind::While { cond, body } => {
                while self.truthy(cond)? {
                    self.steps += 1;
                    if self.steps > STEP_BUDGET {
                        return Err(self.fail(stmt.line, "step budget exhausted (runaway loop?)"));
                    }
                    match self.exec_block(body)? {
                        Flow::Normal => {}
                        ret => return Ok(ret),
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::DoWhile { body, cond } => {
                loop {
                    match self.exec_block(body)? {
                        Flow::Normal => {}
                        ret => return Ok(ret),
                    }
                    self.steps += 1;
                    if self.steps > STEP_BUDGET {
                        return Err(self.fail(stmt.line, "step budget exhausted (runaway loop?)"));
                    }
                    if !self.truthy(cond)? {
                        break;
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::ForEach {
                var,
                iterable,
                body,
                ..
            } => {
                let items = match self.eval(iterable)? {
                    Value::List(items) => items,
                    other => {
                        return Err(self.fail(
                            stmt.line,
                            format!("for expects a list, got `{other}`"),
                        ))
                    }
                };
                for item in items {
                    let frame = self.frames.last_mut().unwrap();
                    frame.scopes.push(HashMap::new());
                    frame.scopes.last_mut().unwrap().insert(var.clone(), item);
                    let mut flow: Result<Flow, String> = Ok(Flow::Normal);
                    for stmt in &body.stmts {
                        match self.exec_stmt(stmt) {
                            Ok(Flow::Normal) => {}
                            other => {
                                flow = other;
                                break;
                            }
                        }
                    }
                    self.frames.last_mut().unwrap().scopes.pop();
                    match flow? {
                        Flow::Normal => {}
                        ret => return Ok(ret),
                    }
                }
                Ok(Flow::Normal)
            }
        }
    }

    fn truthy(&mut self, cond: &Expr) -> Result<bool, String> {
        match self.eval(cond)? {
            Value::Bool(b) => Ok(b),
            other => Err(self.fail(cond.line, format!("condition is `{other}`, not a boolean"))),
        }
    }

    fn assign(&mut self, name: &str, value: Value, line: u32) -> Result<(), String> {
        let frame = self.frames.last_mut().unwrap();
        for scope in frame.scopes.iter_mut().rev() {
            if let Some(slot) = scope.get_mut(name) {
                *slot = value;
                return Ok(());
            }
        }
        if let Some(slot) = self.fields.get_mut(name) {
            *slot = value;
            return Ok(());
        }
        Err(self.fail(line, format!("assignment to undeclared `{name}`")))
    }

    fn lookup(&self, name: &str, line: u32) -> Result<Value, String> {
        let frame = self.frames.last().unwrap();
        for scope in frame.scopes.iter().rev() {
            if let Some(value) = scope.get(name) {
                return Ok(value.clone());
            }
        }
        if let Some(value) = self.fields.get(name) {
            return Ok(value.clone());
        }
        if name == "param" {
            if let Some(value) = &self.param {
                return Ok(value.clone());
            }
        }
        Err(self.fail(line, format!("undefined variable `{name}`")))
    }

    fn eval(&mut self, expr: &Expr) -> Result<Value, String> {
        self.steps += 1;
        if self.steps > STEP_BUDGET {
            return Err(self.fail(expr.line, "step budget exhausted (runaway loop?)"));
        }
        match &expr.kind {
            ExprKind::Null => Ok(Value::Null),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Int(v) => Ok(Value::Int(*v)),
            ExprKind::Str(s) => Ok(Value::Str(s.clone())),
            ExprKind::Var(name) => self.lookup(name, expr.line),
            ExprKind::Mock { type_name } => {
                let handle = self
                    .harness
                    .create_double(type_name)
                    .map_err(|e| self.fail(expr.line, e.to_string()))?;
                Ok(Value::Double(handle))
            }
            ExprKind::Unary { op, operand } => {
                let value = self.eval(operand)?;
                match (op, value) {
                    (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnaryOp::Neg, Value::Int(v)) => Ok(Value::Int(-v)),
                    (_, other) => {
                        Err(self.fail(expr.line, format!("bad operand `{other}` for unary op")))
                    }
                }
            }
            ExprKind::Binary { op, lhs, rhs } => self.eval_binary(*op, lhs, rhs, expr.line),
            ExprKind::Ternary {
                cond,
                then_value,
                else_value,
            } => {
                if self.truthy(cond)? {
                    self.eval(then_value)
                } else {
                    self.eval(else_value)
                }
            }
            ExprKind::MethodCall {
                receiver,
                method,
                args,
            } => {
                let target = self.eval(receiver)?;
                for arg in args {
                    self.eval(arg)?;
                }
                match target {
                    Value::Double(handle) => {
                        self.frames.last_mut().unwrap().line = expr.line;
                        let call_site = self.location(expr.line, 0);
                        self.harness
                            .dispatch(handle, method, call_site)
                            .map_err(|e| self.fail(expr.line, e.to_string()))
                    }
                    other => Err(self.fail(
                        expr.line,
                        format!("method call on `{other}`, not a test double"),
                    )),
                }
            }
            ExprKind::Call { callee, args, .. } => self.eval_call(callee, args, expr.line),
        }
    }

    fn eval_call(&mut self, callee: &str, args: &[Expr], line: u32) -> Result<Value, String> {
        match callee {
            "list" => {
                let mut items = Vec::new();
                for arg in args {
                    items.push(self.eval(arg)?);
                }
                Ok(Value::List(items))
            }
            "range" => {
                let values = self.eval_args(args)?;
                match values.as_slice() {
                    [Value::Int(a), Value::Int(b)] => {
                        Ok(Value::List((*a..*b).map(Value::Int).collect()))
                    }
                    _ => Err(self.fail(line, "range(from, to) expects two integers")),
                }
            }
            "assertEq" => {
                let values = self.eval_args(args)?;
                match values.as_slice() {
                    [left, right] => {
                        if left == right {
                            Ok(Value::Null)
                        } else {
                            Err(self.fail(
                                line,
                                format!("assertEq failed: left `{left}` vs right `{right}`"),
                            ))
                        }
                    }
                    _ => Err(self.fail(line, "assertEq expects two arguments")),
                }
            }
            "assertTrue" => {
                let values = self.eval_args(args)?;
                match values.as_slice() {
                    [Value::Bool(true)] => Ok(Value::Null),
                    [other] => {
                        Err(self.fail(line, format!("assertTrue failed: got `{other}`")))
                    }
                    _ => Err(self.fail(line, "assertTrue expects one argument")),
                }
            }
            _ => {
                let member_ref = self
                    .model
                    .find_method(&self.class().name, callee)
                    .ok_or_else(|| self.fail(line, format!("unknown method `{callee}`")))?;
                let member = self.model.member(member_ref);
                if self.model.role_of(member) != MethodRole::Helper {
                    return Err(self.fail(
                        line,
                        format!("`{callee}` is a lifecycle method and cannot be called directly"),
                    ));
                }
                let args = self.eval_args(args)?;
                self.frames.last_mut().unwrap().line = line;
                self.run_method(member_ref, args)
            }
        }
    }

    fn eval_args(&mut self, args: &[Expr]) -> Result<Vec<Value>, String> {
        args.iter().map(|a| self.eval(a)).collect()
    }

    fn eval_binary(
        &mut self,
        op: BinaryOp,
        lhs: &Expr,
        rhs: &Expr,
        line: u32,
    ) -> Result<Value, String> {
        // Short-circuit forms first.
        match op {
            BinaryOp::And => {
                return if !self.truthy(lhs)? {
                    Ok(Value::Bool(false))
                } else {
                    Ok(Value::Bool(self.truthy(rhs)?))
                };
            }
            BinaryOp::Or => {
                return if self.truthy(lhs)? {
                    Ok(Value::Bool(true))
                } else {
                    Ok(Value::Bool(self.truthy(rhs)?))
                };
            }
            _ => {}
        }
        let left = self.eval(lhs)?;
        let right = self.eval(rhs)?;
        match op {
            BinaryOp::Add => match (left, right) {
                (Value::Int(a), Value::Int(b)) => Ok(Value::Int(a + b)),
                (Value::Str(a), b) => Ok(Value::Str(format!("{a}{b}"))),
                (a, Value::Str(b)) => Ok(Value::Str(format!("{a}{b}"))),
                (a, b) => Err(self.fail(line, format!("cannot add `{a}` and `{b}`"))),
            },
            BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => match (left, right) {
                (Value::Int(a), Value::Int(b)) => match op {
                    BinaryOp::Sub => Ok(Value::Int(a - b)),
                    BinaryOp::Mul => Ok(Value::Int(a * b)),
                    _ if b == 0 => Err(self.fail(line, "division by zero")),
                    _ => Ok(Value::Int(a / b)),
                },
                (a, b) => Err(self.fail(line, format!("arithmetic on `{a}` and `{b}`"))),
            },
            BinaryOp::Eq => Ok(Value::Bool(left == right)),
            BinaryOp::Ne => Ok(Value::Bool(left != right)),
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => match (left, right) {
                (Value::Int(a), Value::Int(b)) => Ok(Value::Bool(match op {
                    BinaryOp::Lt => a < b,
                    BinaryOp::Le => a <= b,
                    BinaryOp::Gt => a > b,
                    _ => a >= b,
                })),
                (a, b) => Err(self.fail(line, format!("cannot order `{a}` and `{b}`"))),
            },
            BinaryOp::And | BinaryOp::Or => unreachable!("handled above"),
        }
    }
}
