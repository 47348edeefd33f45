"""radare2 entry point registering the `binare` core command.

Load inside radare2 with `#!pipe python3 -m archid_r2.binare` or point
r2's Python plugin loader at this file.  The command takes no arguments:
it sends the open binary to the prediction service and applies the
answer to asm.arch, cfg.bigendian and asm.bits.
"""

from .core import PluginConfig, run_identification


def make_command_handler(pipe, config=None):
    config = config or PluginConfig.from_env()

    def process(command: str) -> int:
        if not command.startswith("binare"):
            return 0
        run_identification(pipe, config)
        return 1

    return process


def register() -> bool:
    """Register with the host radare2; returns False outside of r2."""
    try:
        import r2lang
        import r2pipe
    except ImportError:
        return False

    pipe = r2pipe.open()
    handler = make_command_handler(pipe)

    def plugin(_):
        return {
            "name": "binare",
            "licence": "MIT",
            "desc": "identify architecture/endianness/wordsize via prediction service",
            "call": handler,
        }

    r2lang.plugin("core", plugin)
    return True


if __name__ == "__main__":
    if not register():
        raise SystemExit("binare: not running inside radare2 (r2lang unavailable)")
