"""Start the score server: `scoreserver --fixture toy.json --port 8900`."""

from __future__ import annotations

import argparse
import os


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="scoreserver")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--fixture", help="toy table-model fixture JSON")
    source.add_argument("--ar-model", help="pretrained causal LM name (needs --mlm-model)")
    parser.add_argument("--mlm-model", help="pretrained masked LM name")
    parser.add_argument("--max-context", type=int, default=512, help="toy context window")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=int(os.environ.get("SCORESERVER_PORT", 8900)))
    args = parser.parse_args(argv)

    if args.ar_model and not args.mlm_model:
        parser.error("--ar-model requires --mlm-model")

    def loader():
        if args.fixture:
            from .providers import ToyProvider

            return ToyProvider(args.fixture, max_context=args.max_context)
        from .providers import HFProvider

        return HFProvider(args.ar_model, args.mlm_model, device=args.device)

    import uvicorn

    from .app import create_app

    uvicorn.run(create_app(loader=loader), host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
