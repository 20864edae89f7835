use std::collections::VecDeque;
use std::fs::OpenOptions;
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::mesh::{scan_fluent_msh, write_boundary, BoundaryPatch};
use super::{sim, RunError};

/// Solver output file inside the case directory.
pub const CASE_LOG: &str = "case_run.log";
const MESH_LOG: &str = "log.fluentMeshToFoam";

/// Result of one tool invocation. `exit_code` is None when the process was
/// killed (timeout or signal).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolRun {
    pub exit_code: Option<i32>,
    pub log: String,
    pub timed_out: bool,
}

impl ToolRun {
    pub fn success(&self) -> bool {
        self.exit_code == Some(0) && !self.timed_out
    }

    pub fn tail(&self, lines: usize) -> String {
        let all: Vec<&str> = self.log.lines().collect();
        all[all.len().saturating_sub(lines)..].join("\n")
    }
}

pub trait Executor: Send + Sync {
    /// Runs the mesh converter in `case_dir`, populating constant/polyMesh.
    fn convert_mesh(&self, msh: &Path, case_dir: &Path) -> Result<ToolRun, RunError>;

    /// Runs the solver in `case_dir`, appending its output to case_run.log.
    fn run_solver(&self, solver: &str, case_dir: &Path, timeout: Duration) -> Result<ToolRun, RunError>;
}

/// Runs OpenFOAM tools found on PATH.
#[derive(Debug, Default, Clone)]
pub struct ProcessExecutor;

fn run_logged(program: &str, args: &[&str], cwd: &Path, log_path: &Path, timeout: Duration) -> Result<ToolRun, RunError> {
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(log_path)
        .map_err(|e| RunError::io(log_path.display(), e))?;
    let start = file.metadata().map(|m| m.len()).unwrap_or(0);
    let out = file.try_clone().map_err(|e| RunError::io(log_path.display(), e))?;
    let mut child = Command::new(program)
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(out)
        .stderr(file)
        .spawn()
        .map_err(|e| RunError::io(program, e))?;

    let deadline = Instant::now() + timeout;
    let (exit_code, timed_out) = loop {
        match child.try_wait().map_err(|e| RunError::io(program, e))? {
            Some(status) => break (status.code(), false),
            None if Instant::now() >= deadline => {
                log::warn!("{program} exceeded {timeout:?}; killing");
                let _ = child.kill();
                let _ = child.wait();
                break (None, true);
            }
            None => std::thread::sleep(Duration::from_millis(50)),
        }
    };

    let mut f = std::fs::File::open(log_path).map_err(|e| RunError::io(log_path.display(), e))?;
    f.seek(SeekFrom::Start(start)).map_err(|e| RunError::io(log_path.display(), e))?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes).map_err(|e| RunError::io(log_path.display(), e))?;
    Ok(ToolRun {
        exit_code,
        log: String::from_utf8_lossy(&bytes).into_owned(),
        timed_out,
    })
}

impl Executor for ProcessExecutor {
    fn convert_mesh(&self, msh: &Path, case_dir: &Path) -> Result<ToolRun, RunError> {
        let msh = std::fs::canonicalize(msh).map_err(|e| RunError::io(msh.display(), e))?;
        let arg = msh.to_string_lossy();
        run_logged(
            "fluentMeshToFoam",
            &[arg.as_ref()],
            case_dir,
            &case_dir.join(MESH_LOG),
            Duration::from_secs(3600),
        )
    }

    fn run_solver(&self, solver: &str, case_dir: &Path, timeout: Duration) -> Result<ToolRun, RunError> {
        run_logged(solver, &[], case_dir, &case_dir.join(CASE_LOG), timeout)
    }
}

/// One scripted solver invocation of the simulated executor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimRun {
    /// Completes the configured steps unconditionally.
    Succeed,
    /// Checks the case the way the solver's start-up would and fails with an
    /// OpenFOAM-style fatal error on the first problem found.
    Lint,
    Fail { log: String, exit_code: i32 },
    Timeout { partial_log: String },
}

/// Offline stand-in for OpenFOAM. Solver runs follow a script, then repeat
/// the fallback; mesh conversion installs a polyMesh built from the .msh
/// zone declarations or copied from a fixture directory.
#[derive(Debug)]
pub struct SimulatedExecutor {
    script: Mutex<VecDeque<SimRun>>,
    fallback: SimRun,
    poly_mesh: Option<PathBuf>,
    runs: AtomicUsize,
}

impl Default for SimulatedExecutor {
    fn default() -> Self {
        SimulatedExecutor::scripted(Vec::new())
    }
}

impl SimulatedExecutor {
    pub fn scripted(script: Vec<SimRun>) -> Self {
        SimulatedExecutor {
            script: Mutex::new(script.into()),
            fallback: SimRun::Lint,
            poly_mesh: None,
            runs: AtomicUsize::new(0),
        }
    }

    pub fn with_fallback(mut self, run: SimRun) -> Self {
        self.fallback = run;
        self
    }

    pub fn with_poly_mesh(mut self, dir: &Path) -> Self {
        self.poly_mesh = Some(dir.to_path_buf());
        self
    }

    /// Solver invocations so far.
    pub fn solver_runs(&self) -> usize {
        self.runs.load(Ordering::SeqCst)
    }

    fn append_log(case_dir: &Path, text: &str) -> Result<(), RunError> {
        use std::io::Write;
        let path = case_dir.join(CASE_LOG);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| RunError::io(path.display(), e))?;
        f.write_all(text.as_bytes()).map_err(|e| RunError::io(path.display(), e))
    }

    fn install_fixture(&self, src: &Path, case_dir: &Path) -> Result<(), RunError> {
        let dst = case_dir.join("constant/polyMesh");
        std::fs::create_dir_all(&dst).map_err(|e| RunError::io(dst.display(), e))?;
        for entry in std::fs::read_dir(src).map_err(|e| RunError::io(src.display(), e))? {
            let entry = entry.map_err(|e| RunError::io(src.display(), e))?;
            if entry.path().is_file() {
                std::fs::copy(entry.path(), dst.join(entry.file_name()))
                    .map_err(|e| RunError::io(entry.path().display(), e))?;
            }
        }
        Ok(())
    }

    fn synthesize_mesh(msh: &Path, case_dir: &Path) -> Result<String, String> {
        let info = scan_fluent_msh(msh).map_err(|e| e.to_string())?;
        let interior: usize = info.zones.iter().filter(|z| z.zone_type == "interior").map(|z| z.faces).sum();
        let mut start = interior;
        let mut patches = Vec::new();
        for z in info.boundary_zones() {
            patches.push(BoundaryPatch {
                name: z.name.clone(),
                patch_type: z.patch_type().to_string(),
                n_faces: z.faces,
                start_face: start,
            });
            start += z.faces;
        }
        write_boundary(case_dir, &patches).map_err(|e| e.to_string())?;
        let owner = format!(
            "FoamFile\n{{\n    version     2.0;\n    format      ascii;\n    class       labelList;\n    \
             note        \"nPoints:0  nCells:{}  nFaces:{start}  nInternalFaces:{interior}\";\n    \
             location    \"constant/polyMesh\";\n    object      owner;\n}}\n\n0\n(\n)\n",
            info.cells
        );
        std::fs::write(case_dir.join("constant/polyMesh/owner"), owner).map_err(|e| e.to_string())?;
        let mut log = String::from("Reading Fluent mesh\n");
        for p in &patches {
            log.push_str(&format!("Creating patch {} of type {} with {} faces\n", p.name, p.patch_type, p.n_faces));
        }
        log.push_str(&format!("nCells: {}\nEnd\n", info.cells));
        Ok(log)
    }
}

impl Executor for SimulatedExecutor {
    fn convert_mesh(&self, msh: &Path, case_dir: &Path) -> Result<ToolRun, RunError> {
        let outcome = match &self.poly_mesh {
            Some(src) => self.install_fixture(src, case_dir).map(|_| "Installed polyMesh fixture\nEnd\n".to_string()),
            None => Ok(Self::synthesize_mesh(msh, case_dir).unwrap_or_else(|e| format!("--> FOAM FATAL ERROR:\n{e}\n"))),
        }?;
        let failed = outcome.contains("FOAM FATAL");
        std::fs::write(case_dir.join(MESH_LOG), &outcome).map_err(|e| RunError::io(case_dir.display(), e))?;
        Ok(ToolRun {
            exit_code: Some(if failed { 1 } else { 0 }),
            log: outcome,
            timed_out: false,
        })
    }

    fn run_solver(&self, solver: &str, case_dir: &Path, _timeout: Duration) -> Result<ToolRun, RunError> {
        self.runs.fetch_add(1, Ordering::SeqCst);
        let step = self
            .script
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .pop_front()
            .unwrap_or_else(|| self.fallback.clone());
        let run = match step {
            SimRun::Succeed => ToolRun {
                exit_code: Some(0),
                log: sim::simulate_success(case_dir, solver)?,
                timed_out: false,
            },
            SimRun::Lint => match sim::lint_case(case_dir, solver) {
                Ok(()) => ToolRun {
                    exit_code: Some(0),
                    log: sim::simulate_success(case_dir, solver)?,
                    timed_out: false,
                },
                Err(log) => ToolRun {
                    exit_code: Some(1),
                    log,
                    timed_out: false,
                },
            },
            SimRun::Fail { log, exit_code } => ToolRun {
                exit_code: Some(exit_code),
                log,
                timed_out: false,
            },
            SimRun::Timeout { partial_log } => ToolRun {
                exit_code: None,
                log: partial_log,
                timed_out: true,
            },
        };
        Self::append_log(case_dir, &run.log)?;
        Ok(run)
    }
}
