"""Service architecture names mapped to radare2 asm.arch identifiers.

The service reports Debian-style names; radare2 groups several of them
under one disassembler plugin (endianness and bit width are configured
separately).  Names outside this table leave the tool untouched.
"""

ARCH_TO_R2 = {
    "alpha": "alpha",
    "amd64": "x86",
    "arm64": "arm",
    "armel": "arm",
    "armhf": "arm",
    "hppa": "hppa",
    "i386": "x86",
    "ia64": "ia64",
    "m68k": "m68k",
    "mips": "mips",
    "mips64el": "mips",
    "mipsel": "mips",
    "powerpc": "ppc",
    "powerpcspe": "ppc",
    "ppc64": "ppc",
    "ppc64el": "ppc",
    "riscv64": "riscv",
    "s390": "s390",
    "s390x": "s390",
    "sh4": "sh",
    "sparc": "sparc",
    "sparc64": "sparc",
    "x32": "x86",
}
