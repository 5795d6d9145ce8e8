"""``python -m koopmoo.service [--host H] [--port P]``"""

import argparse

import uvicorn

p = argparse.ArgumentParser(prog="koopmoo.service")
p.add_argument("--host", default="127.0.0.1")
p.add_argument("--port", type=int, default=8000)
args = p.parse_args()
uvicorn.run("koopmoo.service.app:app", host=args.host, port=args.port)
