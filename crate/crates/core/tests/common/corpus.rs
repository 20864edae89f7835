//! Deliberately broken tutorial cases and the diagnosis each should get.

use std::path::Path;

use regex::Regex;

use foamagent::builder::CaseSpecification;
use foamagent::foam::FlowRegime;
use foamagent::llm::{ChatResponse, FnProvider, ProviderFailure, TokenUsage};
use foamagent::runner::{classify_error, lint_case, ErrorCategory, ErrorDiagnosis, ErrorHistory, ToolRun, PURPOSE_LOCALIZE};

use super::{gateway, tutorial_case};

pub const AIRFOIL: &str = "incompressible/simpleFoam/airFoil2D";
pub const NOZZLE: &str = "compressible/rhoCentralFoam/nozzleSA";
pub const CAVITY: &str = "incompressible/icoFoam/cavity";
pub const PITZ: &str = "incompressible/simpleFoam/pitzDaily";

pub fn tutorial_solver(tutorial: &str) -> (&'static str, FlowRegime) {
    match tutorial {
        NOZZLE => ("rhoCentralFoam", FlowRegime::Compressible),
        CAVITY => ("icoFoam", FlowRegime::Incompressible),
        _ => ("simpleFoam", FlowRegime::Incompressible),
    }
}

pub enum Breakage {
    Delete(&'static str),
    /// Regex replacement applied once to a file.
    Edit(&'static str, &'static str, &'static str),
    SetDimensions(&'static str, &'static str),
    Timeout,
}

pub struct BrokenCase {
    pub name: &'static str,
    pub tutorial: &'static str,
    pub breakage: Breakage,
    pub category: ErrorCategory,
    pub target: &'static str,
}

const fn entry(
    name: &'static str,
    tutorial: &'static str,
    breakage: Breakage,
    category: ErrorCategory,
    target: &'static str,
) -> BrokenCase {
    BrokenCase {
        name,
        tutorial,
        breakage,
        category,
        target,
    }
}

pub fn corpus() -> Vec<BrokenCase> {
    use Breakage::*;
    use ErrorCategory::*;
    vec![
        entry("airfoil without nut", AIRFOIL, Delete("0/nut"), MissingFile, "0/nut"),
        entry("airfoil without nuTilda", AIRFOIL, Delete("0/nuTilda"), MissingFile, "0/nuTilda"),
        entry("airfoil without U", AIRFOIL, Delete("0/U"), MissingFile, "0/U"),
        entry(
            "airfoil without transportProperties",
            AIRFOIL,
            Delete("constant/transportProperties"),
            MissingFile,
            "constant/transportProperties",
        ),
        entry("airfoil without fvSolution", AIRFOIL, Delete("system/fvSolution"), MissingFile, "system/fvSolution"),
        entry("nozzle without alphat", NOZZLE, Delete("0/alphat"), MissingFile, "0/alphat"),
        entry(
            "nozzle without thermodynamics",
            NOZZLE,
            Delete("constant/thermodynamicProperties"),
            MissingFile,
            "constant/thermodynamicProperties",
        ),
        entry("cavity without p", CAVITY, Delete("0/p"), MissingFile, "0/p"),
        entry("pitzDaily without epsilon", PITZ, Delete("0/epsilon"), MissingFile, "0/epsilon"),
        entry("airfoil p in pressure units", AIRFOIL, SetDimensions("0/p", "[1 -1 -2 0 0 0 0]"), Dimension, "0/p"),
        entry("airfoil U as acceleration", AIRFOIL, SetDimensions("0/U", "[0 1 -2 0 0 0 0]"), Dimension, "0/U"),
        entry("airfoil nut as k", AIRFOIL, SetDimensions("0/nut", "[0 2 -2 0 0 0 0]"), Dimension, "0/nut"),
        entry("nozzle p kinematic", NOZZLE, SetDimensions("0/p", "[0 2 -2 0 0 0 0]"), Dimension, "0/p"),
        entry("nozzle T dimensionless", NOZZLE, SetDimensions("0/T", "[0 0 0 0 0 0 0]"), Dimension, "0/T"),
        entry("cavity p in pressure units", CAVITY, SetDimensions("0/p", "[1 -1 -2 0 0 0 0]"), Dimension, "0/p"),
        entry("pitzDaily k as nut", PITZ, SetDimensions("0/k", "[0 2 -1 0 0 0 0]"), Dimension, "0/k"),
        entry(
            "airfoil lacks nuTilda convection",
            AIRFOIL,
            Edit("system/fvSchemes", r"div\(phi,nuTilda\)[^;]*;", ""),
            General,
            "system/fvSchemes",
        ),
        entry(
            "airfoil misspelt inlet type",
            AIRFOIL,
            Edit("0/U", r"freestreamVelocity;", "freestreamVelocityy;"),
            General,
            "0/U",
        ),
        entry("airfoil p lacks walls", AIRFOIL, Edit("0/p", r"walls\s*\{[^}]*\}", ""), General, "0/p"),
        entry(
            "airfoil unbalanced fvSolution",
            AIRFOIL,
            Edit("system/fvSolution", r"\}\s*(// \*+ //)?\s*$", ""),
            General,
            "system/fvSolution",
        ),
        entry("airfoil wrong constraint", AIRFOIL, Edit("0/U", r"empty;", "symmetryPlane;"), General, "0/U"),
        entry(
            "cavity lacks U convection",
            CAVITY,
            Edit("system/fvSchemes", r"div\(phi,U\)[^;]*;", ""),
            General,
            "system/fvSchemes",
        ),
        entry(
            "pitzDaily misspelt k wall function",
            PITZ,
            Edit("0/k", r"kqRWallFunction;", "kqrWallFunction;"),
            General,
            "0/k",
        ),
        entry(
            "nozzle lacks nuTilda convection",
            NOZZLE,
            Edit("system/fvSchemes", r"div\(phi,nuTilda\)[^;]*;", ""),
            General,
            "system/fvSchemes",
        ),
        entry("airfoil hangs", AIRFOIL, Timeout, General, "system/controlDict"),
    ]
}

pub fn apply(breakage: &Breakage, case_dir: &Path) {
    let edit = |rel: &str, f: &dyn Fn(&str) -> String| {
        let p = case_dir.join(rel);
        let before = std::fs::read_to_string(&p).unwrap();
        let after = f(&before);
        assert_ne!(before, after, "breakage of {rel} changed nothing");
        std::fs::write(p, after).unwrap();
    };
    match breakage {
        Breakage::Delete(rel) => std::fs::remove_file(case_dir.join(rel)).unwrap(),
        Breakage::Edit(rel, pattern, with) => {
            let re = Regex::new(pattern).unwrap();
            edit(rel, &|t| re.replacen(t, 1, *with).into_owned())
        }
        Breakage::SetDimensions(rel, dims) => {
            let re = Regex::new(r"dimensions\s+\[[^\]]*\]").unwrap();
            edit(rel, &|t| re.replacen(t, 1, format!("dimensions      {dims}").as_str()).into_owned())
        }
        Breakage::Timeout => {}
    }
}

/// Solver output for a broken case, as the simulated executor produces it.
pub fn failed_run(case: &BrokenCase, case_dir: &Path) -> ToolRun {
    let (solver, _) = tutorial_solver(case.tutorial);
    if matches!(case.breakage, Breakage::Timeout) {
        let log: String = (1..=40).map(|i| format!("Time = {i}\n\nsmoothSolver:  Solving for Ux\n")).collect();
        return ToolRun {
            exit_code: None,
            log,
            timed_out: true,
        };
    }
    let log = lint_case(case_dir, solver).expect_err(case.name);
    ToolRun {
        exit_code: Some(1),
        log,
        timed_out: false,
    }
}

pub fn tutorial_spec(tutorial: &str) -> CaseSpecification {
    let (solver, regime) = tutorial_solver(tutorial);
    CaseSpecification::new(tutorial, solver, regime)
}

/// Gateway whose only answer is the localisation of a General error; any
/// other request fails, so rule-based classifications stay model-free.
pub fn localizing_gateway(target: &'static str) -> foamagent::llm::Gateway {
    gateway(FnProvider(move |req: &foamagent::llm::ChatRequest| {
        if req.purpose == PURPOSE_LOCALIZE {
            Ok(ChatResponse {
                text: format!("{{\"target_file\": \"{target}\"}}"),
                usage: TokenUsage::new(800, 40),
            })
        } else {
            Err(ProviderFailure::Fatal(format!("unexpected request {}", req.purpose)))
        }
    }))
}

/// Classifies a broken case `repeats` times in a row without correcting it.
pub fn classify_repeatedly(case: &BrokenCase, repeats: u32, threshold: u32) -> Vec<ErrorDiagnosis> {
    let dir = tutorial_case(case.tutorial);
    apply(&case.breakage, dir.path());
    let spec = tutorial_spec(case.tutorial);
    let gw = localizing_gateway(case.target);
    let mut history = ErrorHistory::default();
    (1..=repeats)
        .map(|i| {
            let run = failed_run(case, dir.path());
            let d = classify_error(&run, &history, dir.path(), &spec, &gw, threshold).unwrap_or_else(|e| panic!("{}: {e}", case.name));
            history.record(i, &d);
            d
        })
        .collect()
}
