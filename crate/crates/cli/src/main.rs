use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pfem::drivers::{
    bench_scaling, box_from_params, convergence_study, flow_from_params, mesh_from_params, partition_from_params,
    partition_info, poisson_from_params, solve_poisson, write_poisson_output, write_scaling_csv,
};
use pfem::fespace::{DofMap, FiniteElement};
use pfem::io::{parse_params, ParamTree};
use pfem::splitting::{time_loop, Scheme, Stepping};
use pfem::Error;

#[derive(Parser)]
#[command(name = "pfem", version, about = "Parallel finite-element drivers")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Poisson problem, optionally as a refinement study.
    Poisson {
        #[arg(short, long)]
        params: PathBuf,
        #[arg(long)]
        ranks: Option<usize>,
        /// Number of refinement levels, starting from the configured box.
        #[arg(long)]
        convergence: Option<usize>,
    },
    /// Lid-driven cavity flow with an algebraic splitting scheme.
    Ns {
        #[arg(short, long)]
        params: PathBuf,
        /// exact-lu, perot, yosida or yosidaQ (Q pressure corrections).
        #[arg(long)]
        scheme: Option<Scheme>,
        /// Step-size control from the last pressure correction.
        #[arg(long)]
        adaptive: bool,
        #[arg(long)]
        ranks: Option<usize>,
        /// Continue from a checkpoint.
        #[arg(long)]
        restart: Option<PathBuf>,
    },
    /// Poisson solve for several subdomain counts; prints CSV.
    BenchScaling {
        #[arg(short, long)]
        params: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        ranks: Vec<usize>,
    },
    /// Part sizes, interface and halo statistics of a partition.
    PartitionInfo {
        #[arg(short, long)]
        params: Option<PathBuf>,
        #[arg(long)]
        ranks: Option<usize>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::UnsupportedDegree(_) | Error::Io(_) => 2,
        Error::Divergence(_) | Error::Factorization { .. } => 3,
        _ => 1,
    }
}

fn load(path: &Path) -> pfem::Result<(ParamTree, PathBuf)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read parameter file {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((parse_params(&text)?, base))
}

fn poisson(params: &Path, ranks: Option<usize>, levels: Option<usize>) -> pfem::Result<()> {
    let (p, base) = load(params)?;
    let setup = poisson_from_params(&p, &base, ranks)?;
    if let Some(levels) = levels {
        let spec = box_from_params(&p)?
            .ok_or_else(|| Error::Config("a convergence study needs a box mesh, not a mesh file".into()))?;
        let rows = convergence_study(&spec, levels, setup.partition.n_ranks(), &setup.problem, &setup.options)?;
        println!(
            "{:>6} {:>10} {:>10} {:>6} {:>12} {:>6} {:>12} {:>6}",
            "n", "h", "dofs", "its", "L2", "order", "H1", "order"
        );
        let fmt = |o: Option<f64>| o.map_or("-".to_string(), |v| format!("{v:.2}"));
        for r in &rows {
            println!(
                "{:>6} {:>10.4e} {:>10} {:>6} {:>12.4e} {:>6} {:>12.4e} {:>6}",
                r.n,
                r.h,
                r.dofs,
                r.iterations,
                r.l2,
                fmt(r.l2_order),
                r.h1,
                fmt(r.h1_order)
            );
        }
    } else {
        let sol = solve_poisson(setup.mesh, setup.partition, &setup.problem, &setup.options)?;
        println!("dofs {}", sol.space.n_dofs());
        println!("iterations {}", sol.stats.iterations);
        println!("relative residual {:e}", sol.stats.relative_residual);
        if let Some((l2, h1)) = sol.errors {
            println!("L2 error {l2:e}");
            println!("H1 error {h1:e}");
        }
        write_poisson_output(&sol, &setup.output)?;
    }
    p.warn_unused();
    Ok(())
}

fn ns(
    params: &Path,
    scheme: Option<Scheme>,
    adaptive: bool,
    ranks: Option<usize>,
    restart: Option<&Path>,
) -> pfem::Result<()> {
    let (p, base) = load(params)?;
    let s = flow_from_params(&p, &base, scheme, adaptive, ranks, restart)?;
    p.warn_unused();
    let tr = time_loop(&s.solver, s.initial, s.t_end, s.stepping, &s.outputs)?;
    let its = |f: fn(&pfem::io::StepRecord) -> usize| tr.records.iter().map(f).sum::<usize>();
    println!("scheme {}", s.solver.scheme);
    println!("steps {}", tr.records.len());
    println!("final time {}", tr.state.t);
    println!("velocity iterations {}", its(|r| r.c_iters));
    println!("pressure iterations {}", its(|r| r.schur_iters));
    if let Some(r) = tr.records.last() {
        println!("final divergence {:e}", r.div_norm);
    }
    if matches!(s.stepping, Stepping::Adaptive(_)) {
        println!("non-compliant steps {}", tr.non_compliant);
    }
    Ok(())
}

fn bench(params: &Path, ranks: &[usize]) -> pfem::Result<()> {
    let (p, base) = load(params)?;
    let setup = poisson_from_params(&p, &base, Some(1))?;
    let seed = p.get_or("partition.seed", 0)?;
    p.warn_unused();
    let rows = bench_scaling(setup.mesh, &setup.problem, &setup.options, ranks, seed)?;
    write_scaling_csv(std::io::stdout().lock(), &rows)?;
    if setup.output.csv {
        std::fs::create_dir_all(&setup.output.dir)?;
        let file = std::fs::File::create(setup.output.dir.join(format!("{}_scaling.csv", setup.output.prefix)))?;
        write_scaling_csv(file, &rows)?;
    }
    Ok(())
}

fn info(params: Option<&Path>, ranks: Option<usize>) -> pfem::Result<()> {
    let (p, base) = match params {
        Some(path) => load(path)?,
        None => (ParamTree::empty(), PathBuf::new()),
    };
    let mesh = std::sync::Arc::new(mesh_from_params(&p, &base)?);
    let part = std::sync::Arc::new(partition_from_params(&p, &mesh, ranks)?);
    let el = FiniteElement::new(p.get_or("fe.degree", 1)?, mesh.dim())?;
    let space = DofMap::new(mesh.clone(), part, el, 1)?;
    p.warn_unused();
    println!("{} cells, {} vertices, {} DoFs", mesh.n_cells(), mesh.n_vertices(), space.n_dofs());
    println!("{:>5} {:>9} {:>6} {:>9} {:>10} {:>7}", "rank", "elements", "halo", "dofs", "interface", "ghosts");
    for r in partition_info(&space) {
        println!(
            "{:>5} {:>9} {:>6} {:>9} {:>10} {:>7}",
            r.rank, r.owned_elements, r.halo_elements, r.owned_dofs, r.interface_dofs, r.ghost_dofs
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Poisson { params, ranks, convergence } => poisson(params, *ranks, *convergence),
        Command::Ns { params, scheme, adaptive, ranks, restart } => {
            ns(params, *scheme, *adaptive, *ranks, restart.as_deref())
        }
        Command::BenchScaling { params, ranks } => bench(params, ranks),
        Command::PartitionInfo { params, ranks } => info(params.as_deref(), *ranks),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pfem: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
