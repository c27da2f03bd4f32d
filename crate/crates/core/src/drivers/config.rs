use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::ParamTree;
use crate::linalg::{Method, PreconditionerKind, SolverConfig, SubdomainSolver};
use crate::mesh::{generate_box, read_gmsh, BoxSpec, Mesh};
use crate::partition::{add_halo, build_dual_graph, partition_greedy, Partition};

/// Box described by `[mesh]`: `dim`, `n` or a per-axis `subdivisions`
/// list, and optional `lengths`. `None` when the section names a mesh file.
pub fn box_from_params(p: &ParamTree) -> Result<Option<BoxSpec>> {
    if p.contains("mesh.file") {
        return Ok(None);
    }
    let dim: usize = p.get_or("mesh.dim", 2)?;
    let mut spec = BoxSpec::unit(dim, p.get_or("mesh.n", 8)?);
    if let Some(sub) = p.get::<Vec<usize>>("mesh.subdivisions")? {
        spec.subdivisions = sub;
    }
    if let Some(len) = p.get::<Vec<f64>>("mesh.lengths")? {
        spec.bounds = len.iter().map(|&l| (0.0, l)).collect();
    }
    Ok(Some(spec))
}

/// Mesh from `[mesh]`: either `file = path.msh` (resolved against `base`) or
/// a box as in [`box_from_params`].
pub fn mesh_from_params(p: &ParamTree, base: &Path) -> Result<Mesh> {
    match box_from_params(p)? {
        Some(spec) => generate_box(&spec),
        None => {
            let path = base.join(p.require::<String>("mesh.file")?);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("cannot read mesh file {}: {e}", path.display())))?;
            read_gmsh(&text)
        }
    }
}

/// Greedy partition from `[partition]` (`ranks`, `seed`, `halo`), with the
/// rank count optionally overridden from the command line.
pub fn partition_from_params(p: &ParamTree, mesh: &Mesh, ranks: Option<usize>) -> Result<Partition> {
    let ranks = match ranks {
        Some(r) => r,
        None => p.get_or("partition.ranks", 1)?,
    };
    if ranks == 0 {
        return Err(Error::Config("rank count must be at least 1".into()));
    }
    let seed: u64 = p.get_or("partition.seed", 0)?;
    let halo: usize = p.get_or("partition.halo", 0)?;
    let graph = build_dual_graph(mesh);
    let part = partition_greedy(&graph, ranks, seed)?;
    Ok(if halo > 0 { add_halo(&part, &graph, halo) } else { part })
}

pub fn parse_method(s: &str) -> Result<Method> {
    match s {
        "cg" => Ok(Method::Cg),
        "gmres" => Ok(Method::Gmres),
        "bicgstab" => Ok(Method::BiCgStab),
        _ => Err(Error::Config(format!("unknown solver method '{s}'"))),
    }
}

pub fn parse_subdomain_solver(s: &str) -> Result<SubdomainSolver> {
    match s {
        "lu" | "sparse-lu" => Ok(SubdomainSolver::SparseLu),
        "dense-lu" => Ok(SubdomainSolver::DenseLu),
        "ilu0" | "ilu" => Ok(SubdomainSolver::Ilu0),
        _ => Err(Error::Config(format!("unknown subdomain solver '{s}'"))),
    }
}

/// Solver settings from `section`, falling back to `default` per key.
///
/// Keys: `method`, `tol`, `max_iters`, `restart`, `preconditioner`
/// (none | jacobi | ilu0 | schwarz), `subdomain` and `overlap` for Schwarz.
pub fn solver_from_params(p: &ParamTree, section: &str, default: SolverConfig) -> Result<SolverConfig> {
    let key = |k: &str| format!("{section}.{k}");
    let mut cfg = default;
    if let Some(m) = p.get::<String>(&key("method"))? {
        cfg.method = parse_method(&m)?;
    }
    cfg.tol = p.get_or(&key("tol"), cfg.tol)?;
    cfg.max_iters = p.get_or(&key("max_iters"), cfg.max_iters)?;
    cfg.restart = p.get_or(&key("restart"), cfg.restart)?;
    let (def_overlap, def_solver) = match default.preconditioner {
        PreconditionerKind::Schwarz { overlap, solver } => (overlap, solver),
        _ => (1, SubdomainSolver::SparseLu),
    };
    let overlap = p.get_or(&key("overlap"), def_overlap)?;
    let solver = match p.get::<String>(&key("subdomain"))? {
        Some(s) => parse_subdomain_solver(&s)?,
        None => def_solver,
    };
    cfg.preconditioner = match p.get::<String>(&key("preconditioner"))?.as_deref() {
        None => match cfg.preconditioner {
            PreconditionerKind::Schwarz { .. } => PreconditionerKind::Schwarz { overlap, solver },
            other => other,
        },
        Some("none") => PreconditionerKind::None,
        Some("jacobi") => PreconditionerKind::Jacobi,
        Some("ilu0") => PreconditionerKind::Ilu0,
        Some("schwarz") => PreconditionerKind::Schwarz { overlap, solver },
        Some(other) => return Err(Error::Config(format!("unknown preconditioner '{other}'"))),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Output settings from `[output]`; `dir` is resolved against `base`.
#[derive(Debug, Clone)]
pub struct OutputParams {
    pub dir: PathBuf,
    pub prefix: String,
    pub vtk: bool,
    pub csv: bool,
    pub vtk_every: u64,
    pub checkpoint_every: u64,
    pub checkpoint: bool,
}

impl OutputParams {
    pub fn from_params(p: &ParamTree, base: &Path, prefix: &str) -> Result<Self> {
        Ok(OutputParams {
            dir: base.join(p.get_or("output.dir", "output".to_string())?),
            prefix: p.get_or("output.prefix", prefix.to_string())?,
            vtk: p.get_or("output.vtk", true)?,
            csv: p.get_or("output.csv", true)?,
            vtk_every: p.get_or("output.vtk_every", 0)?,
            checkpoint_every: p.get_or("output.checkpoint_every", 0)?,
            checkpoint: p.get_or("output.checkpoint", true)?,
        })
    }

    pub fn disabled() -> Self {
        OutputParams {
            dir: PathBuf::new(),
            prefix: String::new(),
            vtk: false,
            csv: false,
            vtk_every: 0,
            checkpoint_every: 0,
            checkpoint: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_params;

    #[test]
    fn solver_section_overrides_defaults() {
        let p = parse_params("[s]\nmethod = cg\npreconditioner = schwarz\nsubdomain = ilu0\noverlap = 2\ntol = 1e-6\n")
            .unwrap();
        let c = solver_from_params(&p, "s", SolverConfig::default()).unwrap();
        assert_eq!(c.method, Method::Cg);
        assert_eq!(c.tol, 1e-6);
        assert_eq!(c.preconditioner, PreconditionerKind::Schwarz { overlap: 2, solver: SubdomainSolver::Ilu0 });
        assert!(p.unused().is_empty());
    }

    #[test]
    fn unknown_names_are_config_errors() {
        let p = parse_params("[s]\nmethod = qmr\n").unwrap();
        assert!(matches!(solver_from_params(&p, "s", SolverConfig::default()), Err(Error::Config(_))));
        let p = parse_params("[s]\npreconditioner = amg\n").unwrap();
        assert!(matches!(solver_from_params(&p, "s", SolverConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn box_mesh_and_partition() {
        let p = parse_params("[mesh]\ndim = 3\nn = 2\n[partition]\nranks = 3\nhalo = 1\n").unwrap();
        let m = mesh_from_params(&p, Path::new(".")).unwrap();
        assert_eq!(m.n_cells(), 48);
        let part = partition_from_params(&p, &m, None).unwrap();
        assert_eq!(part.n_ranks(), 3);
        assert_eq!(part.halo_depth(), 1);
        assert_eq!(partition_from_params(&p, &m, Some(2)).unwrap().n_ranks(), 2);
    }
}
