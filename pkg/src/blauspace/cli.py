"""Command-line surface: simulate, fit, segregation, embed, coverage,
geo-sample.

Every command takes ``--seed`` and ``--threads``, writes its outputs
into ``--out``, and finishes with a ``manifest.json`` recording the
arguments and a sha256 per output file.  Figures render by default;
``--no-figures`` keeps runs to the delimited files.  Exit codes: 2 for
configuration problems, 3 for numeric failures, 4 for I/O errors.

File formats (field names):

* attribute table (CSV): ``id``, optional ``weight``, then one column
  per schema column.  A location column ``home`` is stored as the pair
  ``home_x``, ``home_y``.  Empty cells are missing values; rows with any
  missing value are dropped before analysis.
* nominations / edge list (CSV): ``ego_id,alter_id``, one dyad per row.
* dyad records (CSV): ``ego_id,alter_id,edge,ego_weight,alter_weight``
  followed by one column per standardized feature.
* feature config (YAML)::

      columns:
        - {name: income, kind: continuous}
        - {name: religion, kind: categorical}
        - {name: schooling, kind: ordinal, levels: [none, primary, secondary]}
        - {name: farming, kind: mixed_membership, group: occupation}
        - {name: trading, kind: mixed_membership, group: occupation}
        - {name: home, kind: location}
      features:
        - {name: bias, kind: bias}
        - {name: income_gap, kind: abs_diff, column: income}
        - {name: religion_mismatch, kind: mismatch, column: religion}
        - {name: schooling_gap, kind: ordinal_abs_diff, column: schooling}
        - {name: occupation_l1, kind: mixed_l1, group: occupation}
        - {name: home_distance, kind: ordinal_distance, column: home,
           bins: [1, 5, 50], affine: [1.0, 0.0]}
      standardization: {pairs: 20000, seed: 0}

* region file (text): one region per line,
  ``region_id population x,y x,y x,y [; x,y x,y x,y ...]``; semicolons
  separate the rings of a multi-polygon and ``#`` starts a comment.
* separation matrix (binary): magic ``BLAUSEP1``, uint64 LE point count,
  uint64 LE id-block byte length, newline-joined UTF-8 ids, then n*n
  float64 LE values row-major.
"""
from __future__ import annotations

import functools
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from . import __version__, figures, io
from .embedding import (
    classical_mds,
    conditional_profile,
    embedding_grid,
    kernel_smooth,
    silverman_bandwidth,
)
from .errors import ConfigError, NumericError
from .features import evaluate_pair_features, fit_standardization, standardized_pair_features
from .geosample import (
    DEFAULT_DISTANCE_BINS,
    parse_regions,
    sample_control_distance_levels,
    sample_locations,
)
from .inference import (
    DyadRecord,
    PrevalenceRatio,
    estimate_prevalence_ratio,
    fit_map,
    laplace_sd,
    observed_log_likelihood,
    posterior_median,
    sample_posterior,
    winsorize_weights,
)
from .segregation import isolation_profile, separation_matrix, social_strain
from .synthgen import SyntheticConfig, run_coverage, simulate_dataset


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except NumericError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(4)

    return wrapper


def _outdir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_floats(text: str, option: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise ConfigError(f"{option} must be comma-separated numbers, got {text!r}") from None


def _load_yaml_options(path, allowed: set, what: str) -> dict:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: {what} options must be a mapping")
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown {what} keys {sorted(unknown)}")
    return raw


_SYNTH_KEYS = {
    "n_individuals",
    "n_egos",
    "negatives_per_positive",
    "theta_mean",
    "theta_sd",
    "theta_distribution",
}


def _synthetic_config(
    config_path, n, egos, negatives_ratio, theta, theta_sd, default_distribution
) -> SyntheticConfig:
    options = _load_yaml_options(config_path, _SYNTH_KEYS, "synthetic") if config_path else {}
    options.setdefault("theta_distribution", default_distribution)
    if n is not None:
        options["n_individuals"] = n
    if egos is not None:
        options["n_egos"] = egos
    if negatives_ratio is not None:
        options["negatives_per_positive"] = negatives_ratio
    if theta is not None:
        options["theta_mean"] = _parse_floats(theta, "--theta")
    if theta_sd is not None:
        options["theta_sd"] = theta_sd
        options["theta_distribution"] = "normal" if theta_sd > 0 else "fixed"
    if "theta_mean" in options:
        options["theta_mean"] = tuple(float(v) for v in options["theta_mean"])
    try:
        return SyntheticConfig(**options)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _fit_std_on_table(table, config, pairs: int, seed):
    if pairs < 2:
        raise ConfigError("--std-pairs must be at least 2")
    rng = np.random.default_rng(seed)
    i = rng.integers(0, table.n, size=pairs)
    j = rng.integers(0, table.n - 1, size=pairs)
    j = j + (j >= i)
    raw = evaluate_pair_features(table, i, j, config)
    return fit_standardization(raw, config, source=f"{pairs} random pairs, seed {seed}")


@click.group()
@click.version_option(version=__version__, prog_name="blauspace")
def main() -> None:
    """Social-network segregation toolkit: simulate benchmark networks,
    fit connectivity kernels from ego-network samples, compute
    separation, isolation, and strain, embed populations, and validate
    coverage."""


# --- simulate ---------------------------------------------------------------


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="YAML with synthetic options (n_individuals, n_egos, "
              "negatives_per_positive, theta_mean, theta_sd, theta_distribution).")
@click.option("--out", "-o", default="sim", show_default=True, help="Output directory.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker cap; simulation itself is single-process.")
@click.option("--n", type=int, default=None, help="Population size.")
@click.option("--egos", type=int, default=None, help="Number of sampled egos.")
@click.option("--negatives-ratio", type=float, default=None,
              help="Negative records per positive.")
@click.option("--theta", default=None,
              help="Comma-separated true coefficients, e.g. '-7,0,0'; implies a "
              "fixed truth unless --theta-sd is positive.")
@click.option("--theta-sd", type=float, default=None,
              help="Spread of the true-coefficient draw around its mean.")
@click.option("--figures/--no-figures", "render", default=True, show_default=True)
@_guarded
def simulate(config_path, out, seed, threads, n, egos, negatives_ratio, theta, theta_sd, render):
    """Simulate a benchmark network plus an ego-centred dyad sample."""
    if threads < 1:
        raise ConfigError("--threads must be positive")
    # a single simulated dataset defaults to a fixed truth so truth.csv
    # is the exact generating vector; coverage keeps the drawn truth
    cfg = _synthetic_config(
        config_path, n, egos, negatives_ratio, theta, theta_sd, "fixed"
    )
    sim = simulate_dataset(cfg, seed=seed)
    outdir = _outdir(out)

    io.write_attribute_table(outdir / "attributes.csv", sim.table)
    io.write_nominations(
        outdir / "edges.csv",
        ((sim.table.ids[a], sim.table.ids[b]) for a, b in sim.edges),
    )
    io.write_records(outdir / "records.csv", sim.records, sim.config.names)
    io.write_vector_csv(outdir / "truth.csv", sim.config.names, sim.theta, value_col="value")
    io.write_standardization(outdir / "standardization.csv", sim.std, sim.config.names)
    io.dump_config(outdir / "config.yaml", sim.config)
    outputs = [
        outdir / name
        for name in (
            "attributes.csv", "edges.csv", "records.csv",
            "truth.csv", "standardization.csv", "config.yaml",
        )
    ]
    if render:
        figures.plot_network(sim.positions, sim.edges, outdir / "network.png")
        outputs.append(outdir / "network.png")
    io.write_manifest(
        outdir / "manifest.json",
        "simulate",
        {
            "config": config_path, "seed": seed, "threads": threads,
            "n_individuals": cfg.n_individuals, "n_egos": cfg.n_egos,
            "negatives_per_positive": cfg.negatives_per_positive,
            "theta_mean": list(cfg.theta_mean), "theta_sd": cfg.theta_sd,
            "theta_distribution": cfg.theta_distribution,
        },
        outputs,
        extra={
            "n_edges": int(sim.edges.shape[0]),
            "mean_degree": sim.mean_degree,
            "n_records": len(sim.records),
            "n_positive": int(sum(r.edge for r in sim.records)),
        },
    )
    click.echo(
        f"simulated {cfg.n_individuals} individuals, {sim.edges.shape[0]} ties "
        f"(mean degree {sim.mean_degree:.3f}), {len(sim.records)} records -> {outdir}"
    )


# --- fit --------------------------------------------------------------------


def _records_from_survey(table, nominations, config, std, ratio, rng):
    """Case-control records from an attribute table plus a nomination
    list: nominated dyads are the positives, random distinct ego-alter
    pairs the negatives."""
    seen: set[tuple[int, int]] = set()
    pos: list[tuple[int, int]] = []
    skipped = 0
    for ego, alter in nominations:
        if ego not in table or alter not in table or ego == alter:
            skipped += 1
            continue
        i, j = table.index(ego), table.index(alter)
        key = (min(i, j), max(i, j))
        if key in seen:
            continue
        seen.add(key)
        pos.append((i, j))
    if not pos:
        raise ConfigError("no usable nominations: every dyad was missing or self-referential")

    egos = sorted({i for i, _ in pos})
    target = int(round(ratio * len(pos)))
    neg: list[tuple[int, int]] = []
    attempts = 0
    while len(neg) < target and attempts < 100 * target + 1000:
        attempts += 1
        e = egos[int(rng.integers(len(egos)))]
        a = int(rng.integers(table.n))
        if a == e:
            continue
        key = (min(e, a), max(e, a))
        if key in seen:
            continue
        seen.add(key)
        neg.append((e, a))
    if not neg:
        raise ConfigError("could not draw any negative dyads; population too small")

    pairs = pos + neg
    i_idx = np.array([p[0] for p in pairs])
    j_idx = np.array([p[1] for p in pairs])
    feats = standardized_pair_features(table, i_idx, j_idx, config, std)
    weights = table.weights if table.weights is not None else np.ones(table.n)
    labels = [1] * len(pos) + [0] * len(neg)
    records = [
        DyadRecord(
            ego_id=table.ids[i],
            alter_id=table.ids[j],
            edge=lab,
            ego_weight=float(weights[i]),
            alter_weight=float(weights[j]),
            features=feats[k],
        )
        for k, (i, j, lab) in enumerate(zip(i_idx, j_idx, labels))
    ]
    return records, skipped


@main.command()
@click.option("--records", "records_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Prepared dyad record CSV (skips dataset construction).")
@click.option("--attributes", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--nominations", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Feature config YAML (with --attributes).")
@click.option("--out", "-o", default="fit", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--std-pairs", type=int, default=None,
              help="Size of the random pair sample behind standardization "
              "[default: config value or 20000].")
@click.option("--negatives-ratio", type=float, default=3.0, show_default=True)
@click.option("--population-size", type=int, default=None,
              help="Population size behind the prevalence ratio.")
@click.option("--mean-degree", type=float, default=None,
              help="Population mean degree behind the prevalence ratio.")
@click.option("--r0", type=float, default=None, help="Explicit non-tie prevalence ratio.")
@click.option("--r1", type=float, default=None, help="Explicit tie prevalence ratio.")
@click.option("--weighted", is_flag=True, help="Weight record contributions by survey weights.")
@click.option("--winsorize", type=float, default=None,
              help="Clip survey weights at this percentile before use.")
@click.option("--mcmc", is_flag=True, help="Sample the posterior after the MAP fit.")
@click.option("--draws", type=int, default=5000, show_default=True)
@click.option("--burn-in", type=int, default=1000, show_default=True)
@click.option("--gtol", type=float, default=1e-6, show_default=True)
@click.option("--max-iter", type=int, default=10000, show_default=True)
@click.option("--figures/--no-figures", "render", default=True, show_default=True)
@_guarded
def fit(records_path, attributes, nominations, config_path, out, seed, threads,
        std_pairs, negatives_ratio, population_size, mean_degree, r0, r1,
        weighted, winsorize, mcmc, draws, burn_in, gtol, max_iter, render):
    """Fit the connectivity kernel from case-control dyad data.

    Input is either a prepared record file (--records) or a survey
    (--attributes, --nominations, --config), in which case records and a
    standardization are built on the fly and written next to the fit.
    """
    if threads < 1:
        raise ConfigError("--threads must be positive")
    survey_mode = attributes is not None
    if survey_mode == (records_path is not None):
        raise ConfigError("provide either --records or --attributes/--nominations/--config")
    outdir = _outdir(out)
    outputs = []
    built_info = {}

    if survey_mode:
        if nominations is None or config_path is None:
            raise ConfigError("--attributes needs --nominations and --config")
        config, std_options = io.load_config(config_path)
        table = io.read_attribute_table(attributes, config.schema)
        table, dropped = table.drop_incomplete()
        if table.n < 2:
            raise ConfigError("fewer than 2 complete rows in the attribute table")
        if winsorize is not None and table.weights is not None:
            table.weights[:] = winsorize_weights(table.weights, winsorize)
        pairs = std_pairs if std_pairs is not None else std_options.get("pairs", 20000)
        std_seed = std_options.get("seed", seed)
        std = _fit_std_on_table(table, config, pairs, std_seed)
        rng = np.random.default_rng(seed)
        records, skipped = _records_from_survey(
            table, io.read_nominations(nominations), config, std, negatives_ratio, rng
        )
        names = list(config.names)
        io.write_records(outdir / "records.csv", records, names)
        io.write_standardization(outdir / "standardization.csv", std, names)
        outputs += [outdir / "records.csv", outdir / "standardization.csv"]
        built_info = {
            "dropped_incomplete_rows": len(dropped),
            "skipped_nominations": skipped,
            "std_pairs": pairs,
            "std_seed": std_seed,
        }
    else:
        names, records = io.read_records(records_path)

    if (population_size is None) != (mean_degree is None):
        raise ConfigError("--population-size and --mean-degree go together")
    if (r0 is None) != (r1 is None):
        raise ConfigError("--r0 and --r1 go together")
    if population_size is not None and r0 is not None:
        raise ConfigError("give either --population-size/--mean-degree or --r0/--r1")
    if population_size is not None:
        try:
            r = estimate_prevalence_ratio(records, population_size, mean_degree)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif r0 is not None:
        r = PrevalenceRatio(r0=r0, r1=r1)
    else:
        r = PrevalenceRatio.representative()

    kwargs = dict(weighted=weighted, gtol=gtol, max_iter=max_iter, names=tuple(names))
    if mcmc:
        post = sample_posterior(records, r, draws=draws, burn_in=burn_in, seed=seed, **kwargs)
    else:
        post = fit_map(records, r, **kwargs)

    theta_hat = post.map_estimate.theta
    try:
        sd = laplace_sd(post.hessian)
        sd_out = list(sd)
    except NumericError as exc:
        click.echo(f"warning: no Laplace sd ({exc})", err=True)
        sd = None
        sd_out = [None] * len(names)
    io.write_vector_csv(outdir / "map.csv", names, theta_hat, extras={"sd": sd_out})
    io.write_matrix_csv(outdir / "hessian.csv", names, post.hessian)
    outputs += [outdir / "map.csv", outdir / "hessian.csv"]
    if post.chain is not None:
        io.write_chain(outdir / "chain.csv", names, post.chain)
        outputs.append(outdir / "chain.csv")
    if render:
        figures.plot_estimates(names, theta_hat, sd, outdir / "fit.png")
        outputs.append(outdir / "fit.png")
        if post.chain is not None:
            figures.plot_trace(post.chain, names, outdir / "trace.png")
            outputs.append(outdir / "trace.png")

    extra = {
        "r0": post.r.r0,
        "r1": post.r.r1,
        "log_posterior": post.log_posterior,
        "log_likelihood": observed_log_likelihood(
            records, theta_hat, post.r, weighted=weighted
        ),
        "log_likelihood_no_constant": observed_log_likelihood(
            records, theta_hat, post.r, weighted=weighted,
            include_prevalence_constant=False,
        ),
        "grad_norm": post.grad_norm,
        "iterations": post.iterations,
        "n_records": len(records),
        "n_positive": int(sum(rec.edge for rec in records)),
        **built_info,
    }
    if post.acceptance_rate is not None:
        extra["acceptance_rate"] = post.acceptance_rate
    io.write_manifest(
        outdir / "manifest.json",
        "fit",
        {
            "records": records_path, "attributes": attributes,
            "nominations": nominations, "config": config_path,
            "seed": seed, "threads": threads,
            "negatives_ratio": negatives_ratio,
            "population_size": population_size, "mean_degree": mean_degree,
            "weighted": weighted, "winsorize": winsorize,
            "mcmc": mcmc, "draws": draws, "burn_in": burn_in,
            "gtol": gtol, "max_iter": max_iter,
        },
        outputs,
        extra=extra,
    )
    pieces = ", ".join(f"{n}={v:.4g}" for n, v in zip(names, theta_hat))
    click.echo(f"MAP: {pieces}")
    if post.acceptance_rate is not None:
        click.echo(f"chain: {post.chain.shape[0]} draws, acceptance {post.acceptance_rate:.3f}")
    click.echo(f"wrote {outdir}")


# --- segregation ------------------------------------------------------------


def _resolve_theta(fit_dir, theta_text, use, names):
    """Coefficient source for the statistics commands: an explicit vector
    or a fit directory (--use auto prefers the chain median when a chain
    exists)."""
    if (fit_dir is None) == (theta_text is None):
        raise ConfigError("provide exactly one of --fit or --theta")
    if theta_text is not None:
        theta = np.asarray(_parse_floats(theta_text, "--theta"), dtype=float)
        if theta.size != len(names):
            raise ConfigError(
                f"--theta has {theta.size} entries but the config defines {len(names)} features"
            )
        return theta, None, "explicit"
    fit_path = Path(fit_dir)
    map_file = fit_path / "map.csv"
    if not map_file.exists():
        raise ConfigError(f"{map_file}: not found; is {fit_dir!r} a fit directory?")
    fit_names, estimates = io.read_vector_csv(map_file)
    if fit_names != list(names):
        raise ConfigError(
            "feature names in the fit do not match the config "
            f"({fit_names} vs {list(names)})"
        )
    chain = None
    chain_file = fit_path / "chain.csv"
    if chain_file.exists():
        chain_names, chain = io.read_chain(chain_file)
        if chain_names != list(names):
            raise ConfigError("chain feature names do not match the config")
    if use == "map":
        return estimates, chain, "map"
    if use == "median":
        if chain is None:
            raise ConfigError("--use median needs a chain.csv in the fit directory")
        return posterior_median(chain), chain, "chain median"
    if chain is not None:
        return posterior_median(chain), chain, "chain median"
    return estimates, chain, "map"


@main.command()
@click.option("--attributes", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Feature config YAML.")
@click.option("--fit", "fit_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Fit directory holding map.csv (and chain.csv).")
@click.option("--theta", default=None, help="Explicit comma-separated coefficients.")
@click.option("--use", type=click.Choice(["auto", "map", "median"]), default="auto",
              show_default=True, help="Coefficient choice from a fit directory.")
@click.option("--stat", type=click.Choice(["separation", "isolation", "strain"]),
              default="separation", show_default=True)
@click.option("--exclude-feature", multiple=True,
              help="Drop a named feature's contribution (repeatable).")
@click.option("--pairs-subsample", type=int, default=200_000, show_default=True,
              help="Pair subsample size for strain on large populations.")
@click.option("--posterior-quantiles", default=None,
              help="Two comma-separated chain quantiles for strain intervals, "
              "e.g. '0.025,0.975'.")
@click.option("--std-pairs", type=int, default=None,
              help="Standardization sample size when no fitted standardization exists.")
@click.option("--format", "matrix_format", type=click.Choice(["csv", "binary", "both"]),
              default="csv", show_default=True, help="Separation matrix output format.")
@click.option("--out", "-o", default="segregation", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--figures/--no-figures", "render", default=True, show_default=True)
@_guarded
def segregation(attributes, config_path, fit_dir, theta, use, stat, exclude_feature,
                pairs_subsample, posterior_quantiles, std_pairs, matrix_format,
                out, seed, threads, render):
    """Separation matrices, isolation profiles, and strain reports."""
    if threads < 1:
        raise ConfigError("--threads must be positive")
    config, std_options = io.load_config(config_path)
    table = io.read_attribute_table(attributes, config.schema)
    table, dropped = table.drop_incomplete()
    if table.n < 2:
        raise ConfigError("fewer than 2 complete rows in the attribute table")
    theta_vec, chain, source = _resolve_theta(fit_dir, theta, use, config.names)

    std = None
    std_origin = None
    if fit_dir is not None:
        std_file = Path(fit_dir) / "standardization.csv"
        if std_file.exists():
            std_names, std = io.read_standardization(std_file)
            if std_names != list(config.names):
                raise ConfigError("standardization feature names do not match the config")
            std_origin = str(std_file)
    if std is None:
        pairs = std_pairs if std_pairs is not None else std_options.get("pairs", 20000)
        std_seed = std_options.get("seed", seed)
        std = _fit_std_on_table(table, config, pairs, std_seed)
        std_origin = f"fitted on {pairs} random pairs, seed {std_seed}"

    quantiles = None
    if posterior_quantiles is not None:
        parsed = _parse_floats(posterior_quantiles, "--posterior-quantiles")
        if len(parsed) != 2:
            raise ConfigError("--posterior-quantiles needs exactly two values")
        if chain is None:
            raise ConfigError("--posterior-quantiles needs a fit directory with chain.csv")
        quantiles = parsed

    exclude = tuple(exclude_feature)
    outdir = _outdir(out)
    outputs = []
    extra = {
        "stat": stat,
        "theta_source": source,
        "theta": [float(v) for v in theta_vec],
        "standardization": std_origin,
        "dropped_incomplete_rows": len(dropped),
        "n_individuals": table.n,
    }

    if stat == "separation":
        matrix = separation_matrix(
            table, theta_vec, config, std, exclude=exclude, theta_source=source
        )
        if matrix_format in ("csv", "both"):
            io.write_matrix_csv(outdir / "separation.csv", matrix.ids, matrix.values)
            outputs.append(outdir / "separation.csv")
        if matrix_format in ("binary", "both"):
            io.write_separation_binary(outdir / "separation.bin", matrix.ids, matrix.values)
            outputs.append(outdir / "separation.bin")
        if render:
            figures.plot_separation_heatmap(matrix.values, outdir / "separation.png")
            outputs.append(outdir / "separation.png")
        extra["max_separation"] = float(matrix.values.max())
    elif stat == "isolation":
        profile = isolation_profile(table, theta_vec, config, std, exclude=exclude)
        io.write_isolation(outdir / "isolation.csv", table.ids, profile)
        outputs.append(outdir / "isolation.csv")
        if render:
            figures.plot_isolation(profile, outdir / "isolation.png")
            outputs.append(outdir / "isolation.png")
        extra["median_isolation"] = float(np.median(profile))
    else:
        report = social_strain(
            table, theta_vec, config, std,
            exclude=exclude, chain=chain, quantiles=quantiles,
            pair_sample=pairs_subsample, seed=seed, theta_source=source,
        )
        io.write_strain(outdir / "strain.csv", report)
        outputs.append(outdir / "strain.csv")
        if render:
            figures.plot_strain(report, outdir / "strain.png")
            outputs.append(outdir / "strain.png")
        extra["total_strain"] = report.total
        extra["n_pairs"] = report.n_pairs

    io.write_manifest(
        outdir / "manifest.json",
        "segregation",
        {
            "attributes": attributes, "config": config_path, "fit": fit_dir,
            "use": use, "stat": stat, "exclude_feature": list(exclude),
            "pairs_subsample": pairs_subsample,
            "posterior_quantiles": posterior_quantiles,
            "format": matrix_format, "seed": seed, "threads": threads,
        },
        outputs,
        extra=extra,
    )
    click.echo(f"{stat} ({source} coefficients) -> {outdir}")


# --- embed ------------------------------------------------------------------


@main.command()
@click.option("--matrix", "matrix_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Separation matrix, CSV or binary.")
@click.option("-k", "--dimensions", type=int, default=2, show_default=True)
@click.option("--values", "values_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="id,value CSV to colour and smooth over the embedding.")
@click.option("--bandwidth", type=float, default=None,
              help="Gaussian smoothing bandwidth [default: rule of thumb].")
@click.option("--grid-size", type=int, default=0, show_default=True,
              help="Render a smoothed value surface on this grid (0 = off).")
@click.option("--profile", is_flag=True,
              help="Smoothed conditional mean and sd of the values along dimension 1.")
@click.option("--out", "-o", default="embed", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True,
              help="Accepted for interface uniformity; the embedding is deterministic.")
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--figures/--no-figures", "render", default=True, show_default=True)
@_guarded
def embed(matrix_path, dimensions, values_path, bandwidth, grid_size, profile,
          out, seed, threads, render):
    """Embed a separation matrix with classical multidimensional scaling."""
    if threads < 1:
        raise ConfigError("--threads must be positive")
    with open(matrix_path, "rb") as fh:
        magic = fh.read(8)
    if magic == io.SEPARATION_MAGIC:
        ids, matrix = io.read_separation_binary(matrix_path)
    else:
        ids, matrix = io.read_matrix_csv(matrix_path)

    result = classical_mds(matrix, k=dimensions)
    outdir = _outdir(out)
    coords = result.coordinates

    io.write_rows(
        outdir / "embedding.csv",
        ["id"] + [f"dim{d + 1}" for d in range(result.k)],
        (
            [ident] + [io.format_float(v) for v in row]
            for ident, row in zip(ids, coords)
        ),
    )
    io.write_vector_csv(
        outdir / "eigenvalues.csv",
        [str(i + 1) for i in range(result.eigenvalues.size)],
        result.eigenvalues,
        value_col="eigenvalue",
        name_col="component",
    )
    outputs = [outdir / "embedding.csv", outdir / "eigenvalues.csv"]

    values = None
    if values_path is not None:
        value_ids, value_vec = io.read_vector_csv(values_path)
        lookup = dict(zip(value_ids, value_vec))
        missing = [i for i in ids if i not in lookup]
        if missing:
            raise ConfigError(
                f"{values_path}: no value for {len(missing)} embedded ids "
                f"(first: {missing[0]!r})"
            )
        values = np.array([lookup[i] for i in ids])

    if (grid_size > 0 or profile) and values is None:
        raise ConfigError("--grid-size and --profile need --values")

    if grid_size > 0:
        if result.k < 2:
            raise ConfigError("a surface needs at least 2 embedding dimensions")
        gx, gy, queries = embedding_grid(coords, size=grid_size)
        bw = bandwidth if bandwidth is not None else silverman_bandwidth(coords[:, :2])
        surface = kernel_smooth(coords[:, :2], values, queries, bw).reshape(grid_size, grid_size)
        io.write_points_csv(
            outdir / "surface.csv",
            ["x", "y", "value"],
            np.column_stack(
                (np.tile(gx, grid_size), np.repeat(gy, grid_size), surface.ravel())
            ),
        )
        outputs.append(outdir / "surface.csv")
        if render:
            figures.plot_surface(gx, gy, surface, coords, outdir / "surface.png")
            outputs.append(outdir / "surface.png")

    if profile:
        axis = coords[:, :1]
        lo, hi = float(axis.min()), float(axis.max())
        span = hi - lo if hi > lo else 1.0
        grid = np.linspace(lo - 0.05 * span, hi + 0.05 * span, 100)
        bw = bandwidth if bandwidth is not None else silverman_bandwidth(axis)
        mean, sd = conditional_profile(axis, values, grid[:, None], bw)
        io.write_points_csv(
            outdir / "profile.csv", ["position", "mean", "sd"],
            np.column_stack((grid, mean, sd)),
        )
        outputs.append(outdir / "profile.csv")
        if render:
            figures.plot_profile(grid, mean, sd, outdir / "profile.png")
            outputs.append(outdir / "profile.png")

    if render:
        figures.plot_embedding(coords, outdir / "embedding.png", color=values)
        outputs.append(outdir / "embedding.png")

    io.write_manifest(
        outdir / "manifest.json",
        "embed",
        {
            "matrix": matrix_path, "dimensions": dimensions, "values": values_path,
            "bandwidth": bandwidth, "grid_size": grid_size, "profile": profile,
            "seed": seed, "threads": threads,
        },
        outputs,
        extra={
            "stress": result.stress,
            "n_negative_eigenvalues": result.n_negative,
            "eigenvalues_leading": [float(v) for v in result.eigenvalues[:5]],
        },
    )
    click.echo(
        f"embedded {len(ids)} points in {result.k}d: stress {result.stress:.4f}, "
        f"{result.n_negative} negative eigenvalues -> {outdir}"
    )


# --- coverage ---------------------------------------------------------------


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="YAML with synthetic options.")
@click.option("--replications", type=int, default=250, show_default=True)
@click.option("--alpha-grid", default=None,
              help="Comma-separated nominal levels [default: 0.1..0.9].")
@click.option("--n", type=int, default=None, help="Population size per replication.")
@click.option("--egos", type=int, default=None)
@click.option("--negatives-ratio", type=float, default=None)
@click.option("--theta-sd", type=float, default=None)
@click.option("--out", "-o", default="coverage", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True,
              help="Replications run in parallel processes when above 1.")
@click.option("--figures/--no-figures", "render", default=True, show_default=True)
@_guarded
def coverage(config_path, replications, alpha_grid, n, egos, negatives_ratio,
             theta_sd, out, seed, threads, render):
    """Validate credible-set coverage on replicated synthetic benchmarks."""
    if threads < 1:
        raise ConfigError("--threads must be positive")
    cfg = _synthetic_config(
        config_path, n, egos, negatives_ratio, None, theta_sd, "normal"
    )
    alphas = None
    if alpha_grid is not None:
        alphas = _parse_floats(alpha_grid, "--alpha-grid")
    try:
        report = run_coverage(
            cfg, replications=replications, alphas=alphas, seed=seed, threads=threads
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    outdir = _outdir(out)
    io.write_coverage(outdir / "coverage.csv", report)
    outputs = [outdir / "coverage.csv"]
    if render:
        figures.plot_coverage(report, outdir / "coverage.png")
        outputs.append(outdir / "coverage.png")
    io.write_manifest(
        outdir / "manifest.json",
        "coverage",
        {
            "config": config_path, "replications": replications,
            "alpha_grid": alpha_grid, "seed": seed, "threads": threads,
            "n_individuals": cfg.n_individuals, "n_egos": cfg.n_egos,
            "negatives_per_positive": cfg.negatives_per_positive,
            "theta_sd": cfg.theta_sd, "theta_distribution": cfg.theta_distribution,
        },
        outputs,
        extra={
            "n_effective": report.n_effective,
            "failures": report.failures,
            "max_abs_deviation": float(np.abs(report.coverage - report.alphas).max()),
        },
    )
    worst = float(np.abs(report.coverage - report.alphas).max())
    click.echo(
        f"coverage over {report.n_effective} replications "
        f"({report.failures} failed): worst deviation {worst:.3f} -> {outdir}"
    )


# --- geo-sample -------------------------------------------------------------

_GEO_KEYS = {"bins", "pairs"}


@main.command("geo-sample")
@click.option("--regions", "regions_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Region polygon file.")
@click.option("-n", "--count", type=int, default=1000, show_default=True,
              help="Number of locations to draw.")
@click.option("--pairs", type=int, default=None,
              help="Also draw this many location pairs and write their ordinal "
              "distance levels.")
@click.option("--bins", default=None,
              help="Comma-separated distance thresholds [default: 1,5,50].")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="YAML with geo options (bins, pairs).")
@click.option("--out", "-o", default="geo", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--figures/--no-figures", "render", default=True, show_default=True)
@_guarded
def geo_sample(regions_path, count, pairs, bins, config_path, out, seed, threads, render):
    """Draw population-weighted locations from polygonal regions."""
    if threads < 1:
        raise ConfigError("--threads must be positive")
    options = _load_yaml_options(config_path, _GEO_KEYS, "geo") if config_path else {}
    if bins is not None:
        bin_values = _parse_floats(bins, "--bins")
    elif "bins" in options:
        bin_values = tuple(float(b) for b in options["bins"])
    else:
        bin_values = DEFAULT_DISTANCE_BINS
    if pairs is None:
        pairs = int(options.get("pairs", 0))

    with open(regions_path) as fh:
        regions = parse_regions(fh.read())
    rng = np.random.default_rng(seed)
    sample = sample_locations(regions, count, seed=rng)
    outdir = _outdir(out)

    io.write_rows(
        outdir / "locations.csv",
        ["id", "region_id", "x", "y"],
        (
            [str(i), rid, io.format_float(x), io.format_float(y)]
            for i, (rid, (x, y)) in enumerate(zip(sample.region_ids, sample.locations))
        ),
    )
    outputs = [outdir / "locations.csv"]

    extra = {
        "n_regions": len(regions),
        "proposals": sample.proposals,
        "acceptance_rate": sample.acceptance_rate,
        "total_population": float(sum(r.population for r in regions)),
    }
    if pairs > 0:
        levels = sample_control_distance_levels(regions, pairs, bin_values, seed=rng)
        io.write_rows(
            outdir / "distance_levels.csv",
            ["pair", "level"],
            ([str(i), str(int(lv))] for i, lv in enumerate(levels)),
        )
        outputs.append(outdir / "distance_levels.csv")
        extra["mean_level"] = float(levels.mean())
    if render:
        figures.plot_regions(regions, outdir / "regions.png", locations=sample.locations)
        outputs.append(outdir / "regions.png")

    io.write_manifest(
        outdir / "manifest.json",
        "geo-sample",
        {
            "regions": regions_path, "count": count, "pairs": pairs,
            "bins": list(bin_values), "config": config_path,
            "seed": seed, "threads": threads,
        },
        outputs,
        extra=extra,
    )
    click.echo(
        f"drew {count} locations from {len(regions)} regions "
        f"(acceptance {sample.acceptance_rate:.3f}) -> {outdir}"
    )


if __name__ == "__main__":
    main()
