"""Command-line interface: reduce, eval, inspect.

Exit codes: 0 success, 2 configuration error (argparse uses 2 as well),
3 external tool missing or failing, 4 embedding backend error, 5 LLM
error with fallback disabled, 1 anything else. The LLM API key is
never a flag; set TIFRE_LLM_API_KEY (or OPENAI_API_KEY) instead.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    BackendError,
    ConfigError,
    ContractViolation,
    FrameDecodeError,
    LLMError,
    StageError,
    TifreError,
    ToolNotFoundError,
)
from .evalharness import evaluate
from .manifest import RunManifest
from .merging import MERGE_MODES
from .pipeline import (
    DEFAULT_MAX_FRAMES,
    STRATEGIES,
    RunConfig,
    run_tifre,
)
from .prompting import LlmConfig
from .video_io import CONTACT_SHEET_NAME, build_contact_sheet

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_TOOL = 3
EXIT_BACKEND = 4
EXIT_LLM = 5


def _parse_working_res(value: str) -> tuple[int, int]:
    try:
        w, h = value.lower().split("x")
        res = (int(w), int(h))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH (e.g. 224x224), got {value!r}")
    if res[0] < 1 or res[1] < 1:
        raise argparse.ArgumentTypeError(f"resolution must be positive, got {value!r}")
    return res


def _parse_int_list(value: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in value.split(",") if part.strip() != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tifre",
        description="Question-guided video frame reduction: select key frames "
        "by text similarity and fold the rest in by weighted merging.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_reduce = sub.add_parser("reduce", help="run the reduction pipeline on one input")
    p_reduce.add_argument("--input", required=True, help="video file or directory of frames")
    p_reduce.add_argument("--out", required=True, help="output directory")
    p_reduce.add_argument("--question", default=None, help="question guiding frame selection")
    p_reduce.add_argument(
        "--option",
        action="append",
        default=[],
        dest="options",
        help="answer option (repeatable); appended to the rewrite request",
    )
    p_reduce.add_argument(
        "--prompts",
        action="append",
        default=None,
        help='explicit "a photo of ..." prompt (repeatable); bypasses the LLM',
    )
    p_reduce.add_argument(
        "--max-frames", type=int, default=DEFAULT_MAX_FRAMES, help="hard cap k on selected frames"
    )
    p_reduce.add_argument(
        "--threshold",
        type=float,
        default=None,
        help="relative saliency threshold in [0,1]; 0 disables (default 0.8 for tifre)",
    )
    p_reduce.add_argument("--strategy", choices=STRATEGIES, default="tifre")
    p_reduce.add_argument("--merge-mode", choices=MERGE_MODES, default="normalized")
    p_reduce.add_argument(
        "--backend", choices=("mock", "remote", "local-model"), default="mock"
    )
    p_reduce.add_argument("--backend-dim", type=int, default=64, help="embedding dimension")
    p_reduce.add_argument("--backend-url", default="", help="remote embedding endpoint URL")
    p_reduce.add_argument("--image-model", default="", help="local image encoder model file")
    p_reduce.add_argument("--text-model", default="", help="local text encoder model file")
    p_reduce.add_argument("--tokenizer-dir", default="", help="tokenizer directory for the text encoder")
    p_reduce.add_argument("--llm-endpoint", default="", help="chat-completion endpoint URL")
    p_reduce.add_argument("--llm-model", default="", help="chat model name")
    p_reduce.add_argument("--llm-temperature", type=float, default=0.0)
    p_reduce.add_argument("--llm-max-tokens", type=int, default=256)
    p_reduce.add_argument(
        "--llm-transcript", default="", help="replay a recorded LLM response from this file"
    )
    p_reduce.add_argument(
        "--no-fallback",
        action="store_true",
        help="fail instead of extracting prompts heuristically when the LLM errors",
    )
    p_reduce.add_argument("--fps", type=float, default=1.0, help="coarse sampling rate")
    p_reduce.add_argument(
        "--working-res", type=_parse_working_res, default=(224, 224), metavar="WxH"
    )
    p_reduce.add_argument("--seed", type=int, default=0)
    p_reduce.add_argument("--cache-dir", default="", help="embedding cache directory")
    p_reduce.add_argument(
        "--contact-sheet", action="store_true", help="also write a grid image of the key frames"
    )
    p_reduce.add_argument("--decoder", default="ffmpeg", help="video decoder executable")

    p_eval = sub.add_parser("eval", help="synthetic recall/precision study")
    p_eval.add_argument("--n", type=int, default=60, help="frames per scenario")
    p_eval.add_argument("--dim", type=int, default=64)
    p_eval.add_argument("--planted", type=int, default=5, help="planted relevant frames per scenario")
    p_eval.add_argument(
        "--planted-at",
        type=_parse_int_list,
        default=None,
        metavar="I,J,...",
        help="pin planted positions instead of drawing them per seed",
    )
    p_eval.add_argument("--prompt-count", type=int, default=1)
    p_eval.add_argument(
        "--k", type=_parse_int_list, default=(4, 5, 6, 7, 8, 10, 11, 13, 15), metavar="K1,K2,..."
    )
    p_eval.add_argument("--seeds", type=int, default=10, help="number of seeds to average over")
    p_eval.add_argument("--sigma", type=float, default=0.0, help="planted-embedding noise level")
    p_eval.add_argument("--threshold", type=float, default=0.0)
    p_eval.add_argument(
        "--strategies",
        default="tifre,fixed-fps",
        help="comma-separated subset of tifre,fixed-fps",
    )
    p_eval.add_argument("--out", default="", help="directory for report.txt and report.csv")

    p_inspect = sub.add_parser(
        "inspect", help="render a contact sheet from an existing run directory"
    )
    p_inspect.add_argument("--manifest", required=True, help="path to a manifest.json")
    p_inspect.add_argument(
        "--out", default="", help="output image path (default: contact sheet beside the manifest)"
    )
    return parser


def _cmd_reduce(args: argparse.Namespace) -> int:
    cfg = RunConfig(
        input=args.input,
        out_dir=args.out,
        question=args.question,
        options=tuple(args.options),
        prompts=tuple(args.prompts) if args.prompts is not None else None,
        max_frames=args.max_frames,
        threshold=args.threshold,
        strategy=args.strategy,
        merge_mode=args.merge_mode,
        backend_kind=args.backend,
        backend_dim=args.backend_dim,
        backend_url=args.backend_url,
        image_model=args.image_model,
        text_model=args.text_model,
        tokenizer_dir=args.tokenizer_dir,
        llm=LlmConfig(
            endpoint=args.llm_endpoint,
            model=args.llm_model,
            temperature=args.llm_temperature,
            max_tokens=args.llm_max_tokens,
        ),
        llm_transcript=args.llm_transcript,
        allow_fallback=not args.no_fallback,
        fps=args.fps,
        working_res=args.working_res,
        seed=args.seed,
        cache_dir=args.cache_dir,
        contact_sheet=args.contact_sheet,
        decoder=args.decoder,
    )
    manifest = run_tifre(cfg)
    print(
        f"selected {len(manifest.key_indices)} of {manifest.num_frames} frames "
        f"-> {args.out} ({', '.join(manifest.outputs)})"
    )
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    strategies = tuple(s.strip() for s in args.strategies.split(",") if s.strip())
    planted = args.planted_at if args.planted_at is not None else args.planted
    report = evaluate(
        strategies=strategies,
        k_values=args.k,
        n=args.n,
        dim=args.dim,
        planted=planted,
        prompt_count=args.prompt_count,
        sigma=args.sigma,
        seeds=args.seeds,
        threshold=args.threshold,
    )
    text = report.to_text_table()
    print(text, end="")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(text, encoding="utf-8")
        (out_dir / "report.csv").write_text(report.to_csv(), encoding="utf-8")
        print(f"wrote {out_dir / 'report.txt'} and {out_dir / 'report.csv'}")
    return EXIT_OK


def _cmd_inspect(args: argparse.Namespace) -> int:
    manifest_path = Path(args.manifest)
    manifest = RunManifest.read(manifest_path)
    run_dir = manifest_path.parent
    images = []
    for name in manifest.outputs:
        if not name.startswith("key_") or not name.endswith(".png"):
            continue
        with Image.open(run_dir / name) as img:
            images.append(np.asarray(img.convert("RGB"), dtype=np.uint8))
    if not images:
        raise ConfigError(f"manifest {manifest_path} lists no key-frame images")
    out = Path(args.out) if args.out else run_dir / CONTACT_SHEET_NAME
    Image.fromarray(build_contact_sheet(images)).save(out)
    print(f"wrote {out}")
    return EXIT_OK


def _classify(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, ToolNotFoundError):
        return EXIT_TOOL
    if isinstance(exc, FrameDecodeError):
        return EXIT_TOOL
    if isinstance(exc, (BackendError, ContractViolation)):
        return EXIT_BACKEND
    if isinstance(exc, LLMError):
        return EXIT_LLM
    return EXIT_FAILURE


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"reduce": _cmd_reduce, "eval": _cmd_eval, "inspect": _cmd_inspect}
    try:
        return handlers[args.command](args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        cause = exc.__cause__ if exc.__cause__ is not None else exc
        return _classify(cause)
    except TifreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _classify(exc)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
