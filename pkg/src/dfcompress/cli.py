"""``dfcompress`` command line: estimate, oracle-validate, compress, compare.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error,
3 campaign finished without any feasible configuration.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import report
from .campaign import (ABLATION_HEADER, COMPARE_HEADER, INFEASIBLE_EXIT, CampaignConfig,
                       ConfigError, Workspace, compare_entry, compare_rows, parse_dataflows,
                       resolve_seed, run_campaign)
from .cost import ORACLE_MAC_LIMIT, access_counts, network_energy, oracle_access_counts
from .network import NetworkError, load_network

log = logging.getLogger("dfcompress")

COUNT_FIELDS = ("input_reads", "weight_reads", "output_reads", "output_writes",
                "register_accesses")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _floats(text, what):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a number or comma-separated list, got {text!r}")
    if not vals:
        raise UsageError(f"{what} is empty")
    return vals


def _per_layer(vals, n, what):
    if len(vals) == 1:
        return vals * n
    if len(vals) != n:
        raise UsageError(f"{what} needs 1 or {n} values, got {len(vals)}")
    return vals


def _config(args):
    cfg = CampaignConfig.load(args.config) if args.config else CampaignConfig()
    over = {}
    if getattr(args, "network", None):
        over["network"] = args.network
    if getattr(args, "dataflow", None):
        over["dataflows"] = parse_dataflows(args.dataflow)
    if getattr(args, "dataset", None):
        over["dataset"] = args.dataset
        if args.dataset == "synthetic":
            over["mnist"] = None
    if getattr(args, "ablate", None):
        over["ablate"] = args.ablate
    if getattr(args, "episodes", None):
        over["episodes"] = args.episodes
    if getattr(args, "optimizer", None):
        over["optimizer"] = args.optimizer
    if getattr(args, "surrogate", False) and cfg.surrogate is None:
        over["surrogate"] = {}
    if getattr(args, "out", None):
        over["out"] = args.out
    over["seed"] = resolve_seed(getattr(args, "seed", None), cfg.seed)
    cfg = replace(cfg, **over)
    cfg.validate()
    return cfg


# -- estimate ------------------------------------------------------------------

def cmd_estimate(args):
    cfg = _config(args)
    net = load_network(cfg.network)
    n = len(net.layers)
    q = _per_layer(_floats(args.q, "--q"), n, "--q")
    p = _per_layer(_floats(args.p, "--p"), n, "--p")
    if any(v != int(v) for v in q):
        raise UsageError("--q takes integer bit-widths")
    q = [int(v) for v in q]
    k = cfg.cost_constants(net)
    out = Path(cfg.out)
    print(f"{'dataflow':<10}{'total':>16}{'movement':>10}{'logic_area':>12}{'memory_bits':>13}")
    for df in cfg.dataflows:
        rep = network_energy(net, q, p, df, k)
        report.write_csv(out / f"estimate_{df.value}.csv", report.ESTIMATE_HEADER,
                         report.estimate_rows(rep))
        report.write_svg(out / f"breakdown_{df.value}.svg",
                         report.breakdown_svg(rep, f"{net.name} / {df.label} energy breakdown"))
        print(f"{df.value:<10}{rep.total:>16.6g}{rep.movement_fraction:>10.3f}"
              f"{rep.area.logic_area:>12.6g}{rep.area.memory_bits:>13d}")
    return 0


# -- oracle-validate -------------------------------------------------------------

def cmd_oracle_validate(args):
    net = load_network(args.network or "lenet5")
    dataflows = parse_dataflows(args.dataflow or "all")
    rows, failed = [], []
    print(f"{'layer':<7}{'dataflow':<10}{'field':<19}{'analytic':>14}{'oracle':>14}  status")
    for i, layer in enumerate(net.layers):
        for df in dataflows:
            try:
                sim = oracle_access_counts(layer, df, limit=args.limit)
            except ValueError as e:
                log.warning("layer %d skipped for %s: %s", i, df.value, e)
                continue
            ana = access_counts(layer, df)
            if args.perturb:
                ana = replace(ana, **{args.perturb: getattr(ana, args.perturb) + 1})
            for f in COUNT_FIELDS:
                a, s = getattr(ana, f), getattr(sim, f)
                status = "PASS" if a == s else "FAIL"
                if a != s:
                    failed.append((i, df.value, f))
                rows.append([f"L{i}", df.value, f, a, s, status])
                print(f"L{i:<6}{df.value:<10}{f:<19}{a:>14d}{s:>14d}  {status}")
    if args.out:
        report.write_csv(Path(args.out) / "oracle.csv",
                         ["layer", "dataflow", "field", "analytic", "oracle", "status"], rows)
    if failed:
        for i, df, f in failed:
            print(f"FAIL: layer {i} {df} field {f}", file=sys.stderr)
        return 1
    print("all checked counts match")
    return 0


# -- compress / compare ------------------------------------------------------------

def _report_campaign(summary):
    best = summary["best"]
    base = summary["baseline"]
    print(f"{summary['network']} / {summary['dataflow']} ({summary['mode']}, "
          f"{summary['optimizer']}, ablate={summary['ablate']})")
    print(f"  baseline: accuracy {base['accuracy']:.4f}, energy {base['energy']:.6g}")
    if best is None:
        print(f"  no configuration met the accuracy floor {summary['accuracy_floor']:.4f}")
        return
    print(f"  best:     accuracy {best['alpha']:.4f}, energy {best['beta']:.6g} "
          f"({best['energy_reduction']:.2f}x), bits {best['bits']}, "
          f"remaining {[round(v, 4) for v in best['p']]}")


def cmd_compress(args):
    cfg = _config(args)
    if len(cfg.dataflows) != 1:
        raise UsageError("compress runs one dataflow; use compare for several")
    ws = Workspace(cfg, cfg.out)
    df = cfg.dataflows[0]
    result, summary = run_campaign(ws, df, cfg.out, resume=args.resume,
                                   stop_after=args.stop_after)
    if summary is None:
        print(f"stopped after episode {len(result.episodes)} of {cfg.episodes}; "
              f"rerun with --resume to continue")
        return 0
    _report_campaign(summary)
    return 0 if result.feasible else INFEASIBLE_EXIT


def cmd_compare(args):
    cfg = _config(args)
    ws = Workspace(cfg, cfg.out)
    out = Path(cfg.out)
    with_ablation = cfg.ablate != "none"
    entries = []
    for df in cfg.dataflows:
        _, summary = run_campaign(ws, df, out / df.value, ablate="none", resume=args.resume)
        _report_campaign(summary)
        entry = compare_entry(summary)
        if with_ablation:
            for kind in ("quant", "prune"):
                ab, _ = run_campaign(ws, df, out / f"{df.value}-{kind}", ablate=kind,
                                     resume=args.resume)
                entry[f"{kind}_only_energy"] = ab.best.beta if ab.best else ab.beta0
        entries.append(entry)
    header = COMPARE_HEADER + (ABLATION_HEADER if with_ablation else [])
    rows = compare_rows(entries, with_ablation)
    report.write_csv(out / "compare.csv", header, rows)
    report.write_json(out / "compare.json", {"columns": header, "rows": rows,
                                             "config": cfg.to_dict()})
    widths = [max(len(h), 12) for h in header]
    print("".join(f"{h:>{w + 1}}" for h, w in zip(header, widths)))
    for row in rows:
        cells = [f"{v:.6g}" if isinstance(v, float) else str(v) for v in row]
        print("".join(f"{c:>{w + 1}}" for c, w in zip(cells, widths)))
    return 0 if any(e["feasible"] for e in entries) else INFEASIBLE_EXIT


# -- parser --------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="dfcompress", description="Dataflow-aware energy model and "
                "multi-step compression search for small CNN accelerators.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, dataflow_default=None):
        sp.add_argument("--network", help="bundled name (lenet5, vgg_small, tiny) or JSON path")
        sp.add_argument("--dataflow", default=dataflow_default,
                        help="xy, fxfy, xfx, cico or all (comma lists allowed)")
        sp.add_argument("--config", help="campaign config JSON")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")

    e = sub.add_parser("estimate", help="energy/area breakdown per dataflow")
    common(e)
    e.add_argument("--q", default="8", help="weight bits, one value or one per layer")
    e.add_argument("--p", default="1.0", help="remaining fraction, one value or one per layer")
    e.set_defaults(func=cmd_estimate)

    o = sub.add_parser("oracle-validate", help="check access counts against the loop-nest oracle")
    common(o)
    o.add_argument("--limit", type=int, default=ORACLE_MAC_LIMIT,
                   help="skip layers with more MACs than this")
    o.add_argument("--perturb", choices=COUNT_FIELDS, help=argparse.SUPPRESS)
    o.set_defaults(func=cmd_oracle_validate)

    for name, fn, hlp in (("compress", cmd_compress, "run one compression campaign"),
                          ("compare", cmd_compare, "run a campaign per dataflow and rank them")):
        c = sub.add_parser(name, help=hlp)
        common(c)
        c.add_argument("--dataset", choices=("mnist", "synthetic"))
        c.add_argument("--ablate", choices=("none", "quant", "prune"))
        c.add_argument("--optimizer", choices=("sac", "random"))
        c.add_argument("--episodes", type=int)
        c.add_argument("--surrogate", action="store_true",
                       help="synthetic accuracy function instead of training")
        c.add_argument("--resume", action="store_true", help="continue from the saved state")
        if name == "compress":
            c.add_argument("--stop-after", type=int, help=argparse.SUPPRESS)
        c.set_defaults(func=fn)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"dfcompress: error: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:  # --help
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"dfcompress: error: {e}", file=sys.stderr)
        return 2
    except NetworkError as e:
        print(f"dfcompress: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - reported as a runtime failure
        log.debug("failure", exc_info=True)
        print(f"dfcompress: failed: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
