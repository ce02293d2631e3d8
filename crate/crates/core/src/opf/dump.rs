//! Diagnostic problem dump.

use serde::{Deserialize, Serialize};

use gridflex_solver::ConicProgram;

use super::{OpfError, OpfProblem};

#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct Names {
    pub variables: Vec<String>,
    pub equalities: Vec<String>,
    pub inequalities: Vec<String>,
    pub cones: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    name: String,
    terms: Vec<(String, f64)>,
    rhs: f64,
}

#[derive(Serialize, Deserialize)]
struct Cone {
    name: String,
    u: String,
    w: String,
    z: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Dump {
    variables: Vec<String>,
    objective: Vec<(String, f64)>,
    equalities: Vec<Row>,
    inequalities: Vec<Row>,
    cones: Vec<Cone>,
    program: ConicProgram,
}

pub(crate) fn render(problem: &OpfProblem) -> String {
    let names = &problem.names;
    let var = |j: usize| names.variables[j].clone();
    let rows = |m: &gridflex_solver::CsrMatrix, rhs: &[f64], row_names: &[String]| -> Vec<Row> {
        (0..m.nrows())
            .map(|i| Row {
                name: row_names[i].clone(),
                terms: m.row(i).map(|(j, v)| (var(j), v)).collect(),
                rhs: rhs[i],
            })
            .collect()
    };
    let prog = &problem.program;
    let dump = Dump {
        variables: names.variables.clone(),
        objective: prog
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, c)| (var(j), *c))
            .collect(),
        equalities: rows(&prog.eq_matrix, &prog.eq_rhs, &names.equalities),
        inequalities: rows(&prog.ineq_matrix, &prog.ineq_rhs, &names.inequalities),
        cones: prog
            .cones
            .iter()
            .zip(&names.cones)
            .map(|(c, name)| Cone {
                name: name.clone(),
                u: var(c.u),
                w: var(c.w),
                z: c.z.iter().map(|&k| var(k)).collect(),
            })
            .collect(),
        program: prog.clone(),
    };
    serde_json::to_string_pretty(&dump).expect("dump serializes")
}

/// Recovers the solvable program from a dump.
pub fn replay_dump(text: &str) -> Result<ConicProgram, OpfError> {
    let dump: Dump = serde_json::from_str(text).map_err(|e| OpfError::Dump(e.to_string()))?;
    dump.program.validate()?;
    Ok(dump.program)
}
