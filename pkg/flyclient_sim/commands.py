"""
Command-line entry points. Each top-level script instantiates one of the
command classes here and exits with the status returned by run().
"""

import argparse
import csv
import json
import math
import os
import sys
import time
from abc import ABC, abstractmethod
from collections import defaultdict
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from tqdm.auto import tqdm

from .chain import (
    Chain,
    ChainError,
    ConsensusRules,
    build_adversarial_fork,
    build_honest_chain,
    load_chain,
    load_manifest,
    manifest_digest,
    save_chain,
)
from .codec import (
    REPRESENTATIONS,
    Encoding,
    gas_estimate,
    gzip_bytes,
    ni_body,
    read_ni_file,
    write_ni_file,
)
from .logger import Logger
from .params import (
    MODES,
    AdversaryBudget,
    ParamDomainError,
    VerifierParams,
    expected_budget,
    header_savings,
    optimal_c_interactive,
    optimal_c_noninteractive,
)
from .prover import ProverService, parse_listen, serve
from .prover.store import SYNC_MODES
from .stats import acceptance_bound, log_fit, mean_confidence_interval
from .util import work_from_bits
from .verifier import (
    HttpProver,
    LocalProver,
    NiProof,
    ProverError,
    ProverHandle,
    TransportError,
    VerificationSession,
    VerifierOptions,
    check_prover,
    flyclient_verify,
    ni_prove,
    ni_verify,
)
from .verifier.session import FORMATS, PROOF_STYLES, VARIANTS

EXIT_ACCEPTED = 0
EXIT_REJECTED = 1
EXIT_TRANSPORT = 2

PARAMS_CSV_FIELDS = [
    "mode",
    "n_a",
    "c",
    "L",
    "n_det",
    "n_prob",
    "total",
    "proof_bytes",
    "budget",
]
PROOF_SIZE_CSV_FIELDS = [
    "blocks",
    "mode",
    "representation",
    "variant",
    "proof_style",
    "format",
    "reps",
    "mean",
    "ci_low",
    "ci_high",
]
SOUNDNESS_CSV_FIELDS = [
    "blocks",
    "forks",
    "trials",
    "accepted",
    "rate",
    "bound",
    "lam",
    "c",
    "L",
    "validity_ratio",
    "budget_blocks",
]


class Command(ABC):
    """
    A command-line tool. Subclasses extend arg_parser() with their own
    flags, validate them in check_args(), and do their work in run().

    Any flag may also come from a JSON config file passed with --config,
    whose keys are argument names; flags given on the command line win.
    The run_info files commands write are valid config files.
    """

    def __init__(self, args=None):
        if args is None:
            args = self.parse_args()
        self.args = args
        if getattr(self.args, "seed", 0) is None:
            self.args.seed = int(np.random.default_rng().integers(2**31))
            print(f"using seed {self.args.seed}")

    @abstractmethod
    def run(self) -> int:
        """
        Do the command's work, returning the process exit status.
        """

    @classmethod
    def parse_args(cls, argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
        parser = cls.arg_parser()
        known, _ = parser.parse_known_args(argv)
        if known.config:
            parser.set_defaults(**load_config(parser, known.config, vars(known)))
        args = parser.parse_args(argv)
        cls.check_args(parser, args)
        return args

    @classmethod
    def arg_parser(cls) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            description=cls.__doc__,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        parser.add_argument("--config", default=None, type=str)
        return parser

    @classmethod
    def check_args(cls, parser: argparse.ArgumentParser, args: argparse.Namespace):
        """
        Reject invalid or conflicting flags through parser.error().
        """

    def write_run_info(self, output_dir: str):
        os.makedirs(output_dir, exist_ok=True)
        filename = f"run_info_{int(time.time())}.json"
        with open(os.path.join(output_dir, filename), "w+") as f:
            json.dump(self.run_info(), f, indent=4)

    def run_info(self) -> Dict:
        args = {k: v for k, v in self.args.__dict__.items() if k != "config"}
        return dict(
            args=args,
            command=sys.argv[0],
            seed=getattr(self.args, "seed", None),
        )


def load_config(
    parser: argparse.ArgumentParser, path: str, known: Dict[str, Any]
) -> Dict[str, Any]:
    try:
        with open(path, "r") as f:
            config = json.load(f)
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read config {path}: {exc}")
    if isinstance(config, dict) and isinstance(config.get("args"), dict):
        config = config["args"]
    if not isinstance(config, dict):
        parser.error(f"config {path} is not a JSON object")
    config = {k.replace("-", "_"): v for k, v in config.items() if k != "config"}
    unknown = sorted(set(config) - set(known))
    if unknown:
        parser.error(f"unknown config keys: {', '.join(unknown)}")
    return config


def split_list(value: Any, kind=str) -> List[Any]:
    if isinstance(value, (list, tuple)):
        return [kind(x) for x in value]
    if value is None or value == "":
        return []
    return [kind(x.strip()) for x in str(value).split(",") if x.strip()]


def add_seed_arg(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", default=None, type=int, help="drawn at random if omitted")


def add_rules_args(parser: argparse.ArgumentParser):
    parser.add_argument("--engine", default="equihash-stub", type=str)
    parser.add_argument("--schedule", default="fixed", type=str)
    parser.add_argument("--difficulty-scale", default=1024, type=int)
    parser.add_argument("--growth-rate", default=1e-5, type=float)
    parser.add_argument("--sigma", default=0.05, type=float)
    parser.add_argument("--tau", default=4.0, type=float)
    parser.add_argument(
        "--node-format",
        default=None,
        type=str,
        help="distilled for ethash-stub chains, zcash otherwise",
    )
    parser.add_argument("--upgrades", default="", type=str, help="comma-separated heights")


def rules_from_args(parser: argparse.ArgumentParser, args: argparse.Namespace) -> ConsensusRules:
    node_format = args.node_format
    if node_format is None:
        node_format = "distilled" if args.engine == "ethash-stub" else "zcash"
    try:
        rules = ConsensusRules(
            engine=args.engine,
            difficulty_scale=args.difficulty_scale,
            schedule=args.schedule,
            growth_rate=args.growth_rate,
            sigma=args.sigma,
            tau=args.tau,
            node_format=node_format,
            upgrades=tuple(split_list(args.upgrades, int)),
        )
        # Resolve names eagerly so typos fail at parse time.
        rules.pow_engine
        rules.difficulty_schedule
        rules.mmr_format
    except ValueError as exc:
        parser.error(str(exc))
    return rules


def load_rules(path: str) -> ConsensusRules:
    """
    Read consensus rules from a chain directory, a chain manifest or a
    JSON file holding the rules alone.
    """
    if os.path.isdir(path):
        obj = load_manifest(path)
    else:
        with open(path, "r") as f:
            obj = json.load(f)
    if "rules" in obj:
        obj = obj["rules"]
    return ConsensusRules.from_json(obj)


def add_params_args(parser: argparse.ArgumentParser):
    parser.add_argument("--params", default=None, type=str, help="JSON file from params_solve")
    parser.add_argument("--c", default=0.5, type=float)
    parser.add_argument("--L", default=None, type=int)
    parser.add_argument("--lam", default=10.0, type=float)
    parser.add_argument("--n", default=None, type=int, help="the prover's length if omitted")


def check_params_args(parser: argparse.ArgumentParser, args: argparse.Namespace):
    if args.params is None and args.L is None:
        parser.error("either --params or --L is required")
    if args.params is not None and args.L is not None:
        parser.error("--params and --L are mutually exclusive")


def params_from_args(args: argparse.Namespace, n: int, mode: str = "interactive") -> VerifierParams:
    if args.params is not None:
        with open(args.params, "r") as f:
            params = VerifierParams.from_json(json.load(f))
        if params.mode != mode:
            raise ParamDomainError(f"parameters are for {params.mode} proofs, not {mode}")
        return params
    return VerifierParams.create(args.c, args.L, args.lam, args.n or n, mode)


def add_options_args(parser: argparse.ArgumentParser):
    parser.add_argument("--variant", default="reference", choices=VARIANTS)
    parser.add_argument("--proof-style", default="per-sample", choices=PROOF_STYLES)
    parser.add_argument("--format", default="normal", choices=FORMATS)


def options_from_args(
    parser: argparse.ArgumentParser, args: argparse.Namespace, non_interactive: bool = False
) -> VerifierOptions:
    try:
        return VerifierOptions(
            variant=args.variant,
            proof_style=args.proof_style,
            format=args.format,
            non_interactive=non_interactive,
        )
    except ValueError as exc:
        parser.error(str(exc))


def local_prover(chain_dir: str) -> LocalProver:
    print(f"loading chain from {chain_dir}...")
    return LocalProver(ProverService.from_chain(load_chain(chain_dir)), name=chain_dir)


def write_csv(path: str, fields: List[str], rows: List[Dict[str, Any]]):
    dirname = os.path.dirname(path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


class ChainGen(Command):
    """
    Mine a synthetic honest chain and save it to a directory.
    """

    def run(self) -> int:
        rules = rules_from_args(self.arg_parser(), self.args)
        try:
            chain = build_honest_chain(self.args.blocks, rules, self.args.seed, progress=True)
        except ChainError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        manifest = save_chain(chain, self.args.out_dir)
        self.write_run_info(self.args.out_dir)
        print(f"saved {chain.block_count} blocks in {len(chain.branches)} branches")
        print(f"manifest digest: {manifest_digest(manifest).hex()}")
        return 0

    @classmethod
    def arg_parser(cls) -> argparse.ArgumentParser:
        parser = super().arg_parser()
        parser.add_argument("--out-dir", default=None, type=str)
        parser.add_argument("--blocks", default=1000, type=int)
        add_seed_arg(parser)
        add_rules_args(parser)
        return parser

    @classmethod
    def check_args(cls, parser: argparse.ArgumentParser, args: argparse.Namespace):
        super().check_args(parser, args)
        if args.out_dir is None:
            parser.error("--out-dir is required")
        rules_from_args(parser, args)


class ChainFork(Command):
    """
    Forge an adversarial fork of a saved chain and save it to a directory.
    """

    def run(self) -> int:
        chain = load_chain(self.args.chain_dir)
        fork_height = self.args.fork_height
        if fork_height is None:
            fork_height = max(0, chain.tip_height - 100)
        if not 0 <= fork_height < chain.tip_height:
            print(f"error: fork height must lie below the tip {chain.tip_height}", file=sys.stderr)
            return 1
        block_work = work_from_bits(chain.header(fork_height).bits)
        try:
            fork = build_adversarial_fork(
                chain,
                fork_height,
                int(self.args.budget_blocks * block_work),
                self.args.validity_ratio,
                self.args.seed,
                length=self.args.length,
                progress=True,
            )
        except (ChainError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        manifest = save_chain(fork, self.args.out_dir)
        self.write_run_info(self.args.out_dir)
        info = fork.fork_info
        print(
            f"forked at {fork_height}: {info['valid_blocks']} valid and "
            f"{info['invalid_blocks']} invalid blocks"
        )
        print(f"manifest digest: {manifest_digest(manifest).hex()}")
        return 0

    @classmethod
    def arg_parser(cls) -> argparse.ArgumentParser:
        parser = super().arg_parser()
        parser.add_argument("--chain-dir", default=None, type=str)
        parser.add_argument("--out-dir", default=None, type=str)
        parser.add_argument("--fork-height", default=None, type=int, help="tip - 100 if omitted")
        parser.add_argument(
            "--budget-blocks",
            default=10.0,
            type=float,
            help="adversary work budget, in blocks at the fork height's difficulty",
        )
        parser.add_argument("--validity-ratio", default=0.5, type=float)
        parser.add_argument("--length", default=None, type=int)
        add_seed_arg(parser)
        return parser

    @classmethod
    def check_args(cls, parser: argparse.ArgumentParser, args: argparse.Namespace):
        super().check_args(parser, args)
        if args.chain_dir is None or args.out_dir is None:
            parser.error("--chain-dir and --out-dir are required")
        if args.budget_blocks < 0:
            parser.error("--budget-blocks must not be negative")


class ProverServe(Command):
    """
    Serve a saved chain over JSON-RPC.

    The FLYCLIENT_LISTEN, FLYCLIENT_CHAIN_DIR and FLYCLIENT_REPRESENTATION
    environment variables supply defaults for the matching flags.
    """

    def run(self) -> int:
        print(f"syncing node store for {self.args.chain_dir}...")
        service = ProverService.open(
            self.args.chain_dir,
            store_path=self.args.store_path,
            mode=self.args.sync_mode,
            resync=self.args.resync,
        )
        print(f"serving {self.args.representation} answers on {self.args.listen}")
        try:
            serve(service, self.args.listen, self.args.representation)
        finally:
            service.close()
        return 0

    @classmethod
    def arg_parser(cls) -> argparse.ArgumentParser:
        parser = super().arg_parser()
        parser.add_argument(
            "--chain-dir", default=os.environ.get("FLYCLIENT_CHAIN_DIR"), type=str
        )
        parser.add_argument(
            "--listen", default=os.environ.get("FLYCLIENT_LISTEN", "127.0.0.1:8232"), type=str
        )
        parser.add_argument(
            "--representation",
            default=os.environ.get("FLYCLIENT_REPRESENTATION", "binary"),
            type=str,
        )
        parser.add_argument("--store-path", default=None, type=str)
        parser.add_argument("--sync-mode", default="during-sync", choices=SYNC_MODES)
        parser.add_argument("--resync", action="store_true")
        return parser

    @classmethod
    def check_args(cls, parser: argparse.ArgumentParser, args: argparse.Namespace):
        super().check_args(parser, args)
        if args.chain_dir is None:
            parser.error("--chain-dir (or FLYCLIENT_CHAIN_DIR) is required")
        if args.representation not in REPRESENTATIONS:
            parser.error(f"unknown representation: {args.representation}")
        try:
            parse_listen(args.listen)
        except ValueError as exc:
            parser.error(str(exc))


class ParamsSolve(Command):
    """
    Find the (c, L) pairs minimizing the sample count against an adversary
    budget, printing a table and optionally writing CSV.
    """

    def run(self) -> int:
        args = self.args
        budgets = split_list(args.n_a, float)
        d_tilde = args.d_tilde
        if args.w_a is not None:
            budgets = [w / d_tilde for w in split_list(args.w_a, float)]
        modes = list(MODES) if args.mode == "both" else [args.mode]
        try:
            rows = [self.solve(mode, n_a) for n_a in budgets for mode in modes]
        except ParamDomainError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1

        print(" ".join(f"{k:>15}" for k in PARAMS_CSV_FIELDS))
        for row in rows:
            print(" ".join(f"{_format_cell(row[k]):>15}" for k in PARAMS_CSV_FIELDS))
        if args.csv:
            write_csv(args.csv, PARAMS_CSV_FIELDS, rows)

        if args.savings:
            for n_a in budgets:
                for mode, res in header_savings(
                    n_a, args.n, args.lam, args.baseline_c, args.header_bytes
                ).items():
                    print(
                        f"{mode} n_a={n_a:g}: {res['optimal_total']} vs "
                        f"{res['baseline_total']} samples at c={args.baseline_c:g}, "
                        f"saving {100 * res['saving']:.1f}% of header bytes"
                    )

        if args.params_out:
            row = rows[0]
            params = VerifierParams.create(row["c"], row["L"], args.lam, args.n, row["mode"])
            with open(args.params_out, "w+") as f:
                json.dump(params.to_json(), f, indent=4)
        return 0

    def solve(self, mode: str, n_a: float) -> Dict[str, Any]:
        args = self.args
        solver = optimal_c_interactive if mode == "interactive" else optimal_c_noninteractive
        best = solver(n_a, args.n, args.lam)
        budget = AdversaryBudget(
            w_a=n_a * args.d_tilde,
            d_tilde=args.d_tilde,
            c51_per_hour=args.c51_per_hour,
            honest_blocks_per_hour=args.honest_blocks_per_hour,
        )
        return dict(
            mode=mode,
            n_a=n_a,
            c=best.c,
            L=best.L,
            n_det=best.n_det,
            n_prob=best.n_prob,
            total=best.total,
            proof_bytes=best.total * args.header_bytes,
            budget=expected_budget(budget),
        )

    @classmethod
    def arg_parser(cls) -> argparse.ArgumentParser:
        parser = super().arg_parser()
        parser.add_argument("--n-a", default=None, type=str, help="comma-separated budgets")
        parser.add_argument("--w-a", default=None, type=str, help="comma-separated work budgets")
        parser.add_argument("--d-tilde", default=1.0, type=float)
        parser.add_argument("--n", default=3_000_000, type=int)
        parser.add_argument("--lam", default=50.0, type=float)
        parser.add_argument("--mode", default="both", choices=list(MODES) + ["both"])
        parser.add_argument("--header-bytes", default=1487, type=int)
        parser.add_argument("--c51-per-hour", default=20_000.0, type=float)
        parser.add_argument("--honest-blocks-per-hour", default=48.0, type=float)
        parser.add_argument("--baseline-c", default=0.5, type=float)
        parser.add_argument("--savings", action="store_true")
        parser.add_argument("--csv", default=None, type=str)
        parser.add_argument("--params-out", default=None, type=str)
        return parser

    @classmethod
    def check_args(cls, parser: argparse.ArgumentParser, args: argparse.Namespace):
        super().check_args(parser, args)
        if (args.n_a is None) == (args.w_a is None):
            parser.error("exactly one of --n-a and --w-a is required")
        try:
            budgets = split_list(args.n_a if args.w_a is None else args.w_a, float)
        except ValueError as exc:
            parser.error(f"invalid budget list: {exc}")
        if not budgets:
            parser.error("no budgets given")
        if args.d_tilde <= 0:
            parser.error("--d-tilde must be positive")
        if args.params_out and (args.mode == "both" or len(budgets) != 1):
            parser.error("--params-out needs a single --mode and a single budget")


def _format_cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.4f}" if value < 1e6 else f"{value:.4g}"
    return str(value)


class Verify(Command):
    """
    Run the FlyClient verifier against provers, exiting with 0 when one is
    accepted, 1 when all are rejected and 2 when none could be reached.
    """

    def run(self) -> int:
        args = self.args
        rules = load_rules(args.rules or args.chain_dir[0])
        provers: List[ProverHandle] = [local_prover(d) for d in args.chain_dir]
        provers.extend(HttpProver(url, rules, timeout=args.timeout) for url in args.prover)

        n = args.n
        if n is None and args.params is None:
            n = _largest_block_count(provers)
            if n is None:
                print("no prover could be reached", file=sys.stderr)
                return EXIT_TRANSPORT
        options = options_from_args(self.arg_parser(), args)
        try:
            params = params_from_args(args, n)
        except ParamDomainError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_REJECTED

        try:
            VerificationSession(rules, params, options)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_REJECTED
        logger = Logger(args.log) if args.log else None
        try:
            res = flyclient_verify(
                provers,
                rules,
                params,
                options,
                rng=np.random.default_rng(args.seed),
                logger=logger,
            )
        finally:
            if logger is not None:
                logger.close()

        for name, verdict in res.verdicts:
            status = "accepted" if verdict.accepted else f"rejected: {verdict.reason}"
            print(f"{name}: {status}")
        if args.transcript_csv and res.sessions:
            session = res.sessions[-1]
            session.transcript.write_csv(args.transcript_csv, rules, options.format)
        if res.accepted:
            tip = res.info.tip_header
            digest = rules.pow_engine.digest(tip).hex()
            print(
                f"accepted {res.prover.name}: n={res.info.block_count} "
                f"w={res.info.total_work:#x} tip={digest}"
            )
            return EXIT_ACCEPTED
        if res.transport_only:
            return EXIT_TRANSPORT
        return EXIT_REJECTED

    @classmethod
    def arg_parser(cls) -> argparse.ArgumentParser:
        parser = super().arg_parser()
        parser.add_argument("--prover", default=[], action="append", help="JSON-RPC URL")
        parser.add_argument(
            "--chain-dir", default=[], action="append", help="chain served in process"
        )
        parser.add_argument(
            "--rules", default=None, type=str, help="chain directory or rules JSON"
        )
        parser.add_argument("--timeout", default=30.0, type=float)
        parser.add_argument("--transcript-csv", default=None, type=str)
        parser.add_argument("--log", default=None, type=str)
        add_seed_arg(parser)
        add_params_args(parser)
        add_options_args(parser)
        return parser

    @classmethod
    def check_args(cls, parser: argparse.ArgumentParser, args: argparse.Namespace):
        super().check_args(parser, args)
        args.prover = split_list(args.prover)
        args.chain_dir = split_list(args.chain_dir)
        if not args.prover and not args.chain_dir:
            parser.error("at least one --prover or --chain-dir is required")
        if args.rules is None and not args.chain_dir:
            parser.error("--rules is required without a local --chain-dir")
        check_params_args(parser, args)
        options_from_args(parser, args)


def _largest_block_count(provers: List[ProverHandle]) -> Optional[int]:
    res = None
    for p in provers:
        try:
            count = p.get_blockchain_info().block_count
        except (TransportError, ProverError):
            continue
        res = count if res is None else max(res, count)
    return res


class ProveNi(Command):
    """
    Build a non-interactive proof for a chain and write it to a file.
    """

    def run(self) -> int:
        args = self.args
        rules = load_rules(args.chain_dir)
        digest = manifest_digest(load_manifest(args.chain_dir))
        if args.prover:
            prover = HttpProver(args.prover, rules)
        else:
            prover = local_prover(args.chain_dir)
        options = options_from_args(self.arg_parser(), args, non_interactive=True)
        try:
            n = args.n or prover.get_blockchain_info().block_count
            params = params_from_args(args, n, mode="non-interactive")
            proof = ni_prove(prover, rules, params, options)
        except TransportError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_TRANSPORT
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1

        enc = Encoding(representation=args.representation, scope="whole-proof", format=args.format)
        size = write_ni_file(args.out, proof, enc, rules, digest)
        print(f"wrote {size} bytes to {args.out}")
        verdict = ni_verify(proof, rules, params, options)
        if not verdict.accepted:
            print(f"warning: the proof does not verify: {verdict.reason}", file=sys.stderr)
            return 1
        return 0

    @classmethod
    def arg_parser(cls) -> argparse.ArgumentParser:
        parser = super().arg_parser()
        parser.add_argument("--chain-dir", default=None, type=str)
        parser.add_argument(
            "--prover", default=None, type=str, help="query this URL instead of the chain"
        )
        parser.add_argument("--out", default=None, type=str)
        parser.add_argument("--representation", default="binary", choices=REPRESENTATIONS)
        add_params_args(parser)
        add_options_args(parser)
        return parser

    @classmethod
    def check_args(cls, parser: argparse.ArgumentParser, args: argparse.Namespace):
        super().check_args(parser, args)
        if args.chain_dir is None or args.out is None:
            parser.error("--chain-dir and --out are required")
        check_params_args(parser, args)
        options_from_args(parser, args, non_interactive=True)


class VerifyNi(Command):
    """
    Verify a non-interactive proof file, exiting with 0 on acceptance.
    """

    def run(self) -> int:
        args = self.args
        rules = load_rules(args.rules)
        try:
            ni_file = read_ni_file(args.proof)
            if ni_file.encoding.representation == "json":
                proof = NiProof.from_json(json.loads(ni_file.body))
            else:
                proof = NiProof.from_bytes(ni_file.body, rules)
        except (OSError, ValueError) as exc:
            print(f"rejected: unreadable proof: {exc}")
            return 1
        if os.path.isdir(args.rules):
            expected = manifest_digest(load_manifest(args.rules))
            if expected != ni_file.manifest_digest:
                print("rejected: proof was made for another chain manifest")
                return 1
        try:
            params = params_from_args(args, proof.block_count, mode="non-interactive")
        except ParamDomainError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1

        logger = Logger(args.log) if args.log else None
        try:
            verdict = ni_verify(proof, rules, params, logger=logger)
        finally:
            if logger is not None:
                logger.close()
        if not verdict.accepted:
            print(f"rejected: {verdict.reason}")
            return 1
        print(f"accepted: n={proof.block_count} w={proof.total_work:#x}")
        return 0

    @classmethod
    def arg_parser(cls) -> argparse.ArgumentParser:
        parser = super().arg_parser()
        parser.add_argument("--proof", default=None, type=str)
        parser.add_argument(
            "--rules", default=None, type=str, help="chain directory or rules JSON"
        )
        parser.add_argument("--log", default=None, type=str)
        add_params_args(parser)
        return parser

    @classmethod
    def check_args(cls, parser: argparse.ArgumentParser, args: argparse.Namespace):
        super().check_args(parser, args)
        if args.proof is None or args.rules is None:
            parser.error("--proof and --rules are required")
        check_params_args(parser, args)


class BenchProofSize(Command):
    """
    Measure proof sizes over repeated verification runs with independent
    sampling seeds, writing the mean and confidence interval per point.

    Every configuration reuses the same per-repetition seeds, so rows are
    paired across variants and proof styles. A configuration whose chain
    is rejected gets no row and makes the command fail.
    """

    def run(self) -> int:
        args = self.args
        self.failures: List[str] = []
        os.makedirs(args.out_dir, exist_ok=True)
        self.write_run_info(args.out_dir)
        rows = []
        binary_means = defaultdict(list)
        with Logger(os.path.join(args.out_dir, "log.txt")) as logger:
            for chain in self.chains():
                n = chain.block_count
                params = params_from_args(args, n)
                for variant, style, fmt in self.configs(chain.rules, logger):
                    options = VerifierOptions(variant=variant, proof_style=style, format=fmt)
                    sizes = self.measure(chain, params, options, logger)
                    if sizes is None:
                        continue
                    for rep_name, values in sizes.items():
                        rows.append(
                            self.row(n, "interactive", rep_name, options, values)
                        )
                    binary_means[(variant, style, fmt)].append((n, np.mean(sizes["binary"])))
                if args.non_interactive:
                    rows.extend(self.measure_ni(chain, logger))
            logger.mark_save()

            for (variant, style, fmt), points in sorted(binary_means.items()):
                if len(points) < 2:
                    continue
                fit = log_fit(*zip(*points))
                logger.note(
                    f"log fit {variant}/{style}/{fmt}: bytes = {fit.a:.1f} + "
                    f"{fit.b:.1f} ln n (r^2={fit.r_squared:.4f})"
                )

        write_csv(os.path.join(args.out_dir, "proof_sizes.csv"), PROOF_SIZE_CSV_FIELDS, rows)
        for message in self.failures:
            print(f"error: {message}", file=sys.stderr)
        return EXIT_REJECTED if self.failures else EXIT_ACCEPTED

    def reject(self, logger: Logger, what: str, reason: str):
        message = f"{what} rejected: {reason}"
        logger.note(message)
        self.failures.append(message)

    def chains(self):
        args = self.args
        for chain_dir in args.chain_dir:
            print(f"loading chain from {chain_dir}...")
            yield load_chain(chain_dir)
        if args.blocks:
            rules = rules_from_args(self.arg_parser(), args)
            for blocks in args.blocks:
                yield build_honest_chain(blocks, rules, args.seed, progress=True)

    def configs(self, rules: ConsensusRules, logger: Logger):
        for variant in self.args.variants:
            for style in self.args.styles:
                for fmt in self.args.formats:
                    if variant == "fixed-difficulty" and rules.schedule != "fixed":
                        logger.note(f"skipping {variant}: the chain's difficulty varies")
                    elif fmt == "distilled" and (
                        style != "cumulative" or rules.consensus != "distilled"
                    ):
                        logger.note(f"skipping distilled {style} proofs on this chain")
                    else:
                        yield variant, style, fmt

    def measure(
        self,
        chain: Chain,
        params: VerifierParams,
        options: VerifierOptions,
        logger: Logger,
    ) -> Optional[Dict[str, List[int]]]:
        prover = LocalProver(ProverService.from_chain(chain))
        info = prover.get_blockchain_info()
        encodings = {
            rep: Encoding(representation=rep, format=options.format) for rep in REPRESENTATIONS
        }
        logger.note(
            f"blocks={chain.block_count} variant={options.variant} "
            f"style={options.proof_style} format={options.format}"
        )
        sizes = defaultdict(list)
        for rep in tqdm(range(self.args.reps), desc=options.variant, leave=False):
            rng = np.random.default_rng([self.args.seed, rep])
            session = VerificationSession(chain.rules, params, options, rng=rng, logger=logger)
            verdict = check_prover(prover, info, session)
            if not verdict.accepted:
                what = (
                    f"blocks={chain.block_count} {options.variant}/{options.proof_style}/"
                    f"{options.format} rep {rep}"
                )
                self.reject(logger, what, verdict.reason)
                return None
            measured = {
                name: session.transcript.measure(enc, chain.rules)
                for name, enc in encodings.items()
            }
            for name, size in measured.items():
                sizes[name].append(size)
            logger.log(rep, blocks=chain.block_count, **measured)
        return sizes

    def measure_ni(self, chain: Chain, logger: Logger) -> List[Dict[str, Any]]:
        rules = chain.rules
        params = params_from_args(self.args, chain.block_count, mode="non-interactive")
        prover = LocalProver(ProverService.from_chain(chain))
        rows = []
        for style in self.args.styles:
            for fmt in self.args.formats:
                if fmt == "distilled" and (
                    style != "cumulative" or rules.consensus != "distilled"
                ):
                    continue
                options = VerifierOptions(proof_style=style, format=fmt, non_interactive=True)
                proof = ni_prove(prover, rules, params, options)
                verdict = ni_verify(proof, rules, params)
                if not verdict.accepted:
                    what = f"non-interactive blocks={chain.block_count} {style}/{fmt}"
                    self.reject(logger, what, verdict.reason)
                    continue
                binary = ni_body(proof, Encoding(format=fmt), rules)
                sizes = dict(
                    json=len(ni_body(proof, Encoding(representation="json", format=fmt), rules)),
                    binary=len(binary),
                    zipped=len(gzip_bytes(binary)),
                )
                logger.note(
                    f"non-interactive blocks={chain.block_count} style={style} format={fmt} "
                    + " ".join(f"{k}={v}" for k, v in sizes.items())
                )
                for rep_name, size in sizes.items():
                    rows.append(
                        self.row(chain.block_count, "non-interactive", rep_name, options, [size])
                    )
        return rows

    @staticmethod
    def row(
        n: int, mode: str, representation: str, options: VerifierOptions, values: List[int]
    ) -> Dict[str, Any]:
        ci = mean_confidence_interval(values)
        return dict(
            blocks=n,
            mode=mode,
            representation=representation,
            variant=options.variant,
            proof_style=options.proof_style,
            format=options.format,
            reps=ci.count,
            mean=ci.mean,
            ci_low=ci.low,
            ci_high=ci.high,
        )

    @classmethod
    def arg_parser(cls) -> argparse.ArgumentParser:
        parser = super().arg_parser()
        parser.add_argument("--out-dir", default=None, type=str)
        parser.add_argument("--chain-dir", default=[], action="append")
        parser.add_argument(
            "--blocks", default="", type=str, help="comma-separated chain lengths to mine"
        )
        parser.add_argument("--reps", default=30, type=int)
        parser.add_argument("--variants", default="reference", type=str)
        parser.add_argument("--styles", default=",".join(PROOF_STYLES), type=str)
        parser.add_argument("--formats", default="normal", type=str)
        parser.add_argument("--non-interactive", action="store_true")
        add_seed_arg(parser)
        add_rules_args(parser)
        add_params_args(parser)
        return parser

    @classmethod
    def check_args(cls, parser: argparse.ArgumentParser, args: argparse.Namespace):
        super().check_args(parser, args)
        if args.out_dir is None:
            parser.error("--out-dir is required")
        args.chain_dir = split_list(args.chain_dir)
        try:
            args.blocks = split_list(args.blocks, int)
        except ValueError as exc:
            parser.error(f"invalid --blocks: {exc}")
        if not args.chain_dir and not args.blocks:
            parser.error("at least one --chain-dir or --blocks length is required")
        if args.blocks:
            rules_from_args(parser, args)
        if args.reps < 1:
            parser.error("--reps must be positive")
        for name, allowed in [
            ("variants", VARIANTS),
            ("styles", PROOF_STYLES),
            ("formats", FORMATS),
        ]:
            values = split_list(getattr(args, name))
            bad = [x for x in values if x not in allowed]
            if bad or not values:
                parser.error(f"invalid --{name}: {', '.join(bad) or 'empty'}")
            setattr(args, name, values)
        check_params_args(parser, args)


class BenchSoundness(Command):
    """
    Estimate how often adversarial forks are accepted, and compare the rate
    with the soundness error the parameters promise.

    By default each fork holds c L blocks of valid work at half the validity
    ratio c, and is long enough to outweigh the honest chain.
    """

    def run(self) -> int:
        args = self.args
        os.makedirs(args.out_dir, exist_ok=True)
        self.write_run_info(args.out_dir)
        rules = rules_from_args(self.arg_parser(), args)
        honest = build_honest_chain(args.blocks, rules, args.seed, progress=True)
        params = params_from_args(args, honest.block_count)
        ratio = args.validity_ratio if args.validity_ratio is not None else params.c / 2
        budget_blocks = args.budget_blocks
        if budget_blocks is None:
            budget_blocks = params.c * params.L
        fork_length = math.ceil(math.floor(budget_blocks) / ratio)
        fork_height = honest.block_count - fork_length
        if not 0 <= fork_height < honest.tip_height:
            print(f"error: a fork of {fork_length} blocks does not fit the chain", file=sys.stderr)
            return 1

        per_fork = [args.trials // args.forks] * args.forks
        for i in range(args.trials % args.forks):
            per_fork[i] += 1

        accepted = 0
        with Logger(os.path.join(args.out_dir, "log.txt")) as logger:
            logger.note(
                f"blocks={honest.block_count} fork_height={fork_height} "
                f"fork_length={fork_length} validity_ratio={ratio:g} "
                f"n_det={params.n_det} n_prob={params.n_prob}"
            )
            for i, trials in enumerate(per_fork):
                block_work = work_from_bits(honest.header(fork_height).bits)
                fork = build_adversarial_fork(
                    honest,
                    fork_height,
                    int(budget_blocks * block_work),
                    ratio,
                    seed=args.seed + 1 + i,
                    length=fork_length,
                )
                prover = LocalProver(ProverService.from_chain(fork), name=f"fork{i}")
                info = prover.get_blockchain_info()
                fork_accepted = 0
                for t in tqdm(range(trials), desc=f"fork {i}", leave=False):
                    rng = np.random.default_rng([args.seed, i, t])
                    session = VerificationSession(rules, params, rng=rng)
                    fork_accepted += check_prover(prover, info, session).accepted
                accepted += fork_accepted
                logger.log(
                    i,
                    trials=trials,
                    accepted=fork_accepted,
                    invalid_blocks=fork.fork_info["invalid_blocks"],
                )
            logger.mark_save()

            rate = accepted / args.trials
            bound = acceptance_bound(params.lam, args.trials)
            logger.note(f"acceptance rate {rate:.6f} against bound {bound:.6f}")

        row = dict(
            blocks=honest.block_count,
            forks=args.forks,
            trials=args.trials,
            accepted=accepted,
            rate=rate,
            bound=bound,
            lam=params.lam,
            c=params.c,
            L=params.L,
            validity_ratio=ratio,
            budget_blocks=budget_blocks,
        )
        write_csv(os.path.join(args.out_dir, "soundness.csv"), SOUNDNESS_CSV_FIELDS, [row])
        return 0 if rate <= bound else 1

    @classmethod
    def arg_parser(cls) -> argparse.ArgumentParser:
        parser = super().arg_parser()
        parser.add_argument("--out-dir", default=None, type=str)
        parser.add_argument("--blocks", default=1000, type=int)
        parser.add_argument("--forks", default=10, type=int)
        parser.add_argument("--trials", default=10_000, type=int)
        parser.add_argument("--validity-ratio", default=None, type=float, help="c / 2 if omitted")
        parser.add_argument("--budget-blocks", default=None, type=float, help="c L if omitted")
        add_seed_arg(parser)
        add_rules_args(parser)
        add_params_args(parser)
        return parser

    @classmethod
    def check_args(cls, parser: argparse.ArgumentParser, args: argparse.Namespace):
        super().check_args(parser, args)
        if args.out_dir is None:
            parser.error("--out-dir is required")
        if args.forks < 1 or args.trials < args.forks:
            parser.error("need at least one fork and one trial per fork")
        if args.validity_ratio is not None and not 0 < args.validity_ratio <= 1:
            parser.error("--validity-ratio must lie in (0, 1]")
        if args.budget_blocks is not None and args.budget_blocks < 1:
            parser.error("--budget-blocks must cover at least one block")
        rules_from_args(parser, args)
        check_params_args(parser, args)


class Gas(Command):
    """
    Estimate the calldata gas and cost of submitting a proof on chain.
    """

    def run(self) -> int:
        args = self.args
        if args.proof is not None:
            with open(args.proof, "rb") as f:
                proof: Any = f.read()
        else:
            proof = args.bytes
        res = gas_estimate(proof, args.gas_price_gwei, args.token_price)
        suffix = " (approximate: every byte assumed non-zero)" if res.approximate else ""
        print(f"gas: {res.gas}{suffix}")
        print(f"cost: {res.cost:.2f} {args.currency}")
        return 0

    @classmethod
    def arg_parser(cls) -> argparse.ArgumentParser:
        parser = super().arg_parser()
        group = parser.add_mutually_exclusive_group()
        group.add_argument("--proof", default=None, type=str, help="proof file to submit")
        group.add_argument("--bytes", default=None, type=int, help="proof size")
        parser.add_argument("--gas-price-gwei", default=0.125, type=float)
        parser.add_argument("--token-price", default=2100.0, type=float)
        parser.add_argument("--currency", default="USD", type=str)
        return parser

    @classmethod
    def check_args(cls, parser: argparse.ArgumentParser, args: argparse.Namespace):
        super().check_args(parser, args)
        if (args.proof is None) == (args.bytes is None):
            parser.error("exactly one of --proof and --bytes is required")
        if args.bytes is not None and args.bytes < 0:
            parser.error("--bytes must not be negative")
