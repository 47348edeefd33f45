"""Synthetic corpora for desk-scale experiments and demos.

Each synthetic "architecture" is a multinomial byte distribution plus a
set of planted byte-string salts (instances of builtin signatures, or
endianness marker pairs).  Generators are fully seeded; the same seed
always yields the same corpus.  A minimal ELF writer lets generated
corpora exercise the real container-parsing path.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .binfmt import RawSample


@dataclass(frozen=True)
class SyntheticClass:
    name: str
    byte_dist: np.ndarray            # 256 probabilities
    salts: tuple = ()                # ((instance_bytes, byte_rate), ...)


def _mixed_distribution(rng, common, weight):
    specific = rng.dirichlet(np.full(256, 0.5))
    dist = (1.0 - weight) * common + weight * specific
    return dist / dist.sum()


def separable_specs(n_classes: int = 10, seed: int = 42, distinct_weight: float = 0.3):
    """Distinct byte distributions, each salted with a 4-byte signature instance."""
    names = ["alpha", "amd64", "armel", "hppa", "i386",
             "m68k", "mips", "powerpc", "s390", "sh4",
             "arm64", "armhf", "ia64", "mips64el", "mipsel",
             "powerpcspe", "ppc64", "ppc64el", "riscv64", "s390x",
             "sparc", "sparc64", "x32"][:n_classes]
    salts = [
        b"\xf8\x61\x00\x10",  # ppc64_prolog_3 instance
        b"\x55\x48\x89\xe5",  # amd64_prolog_1
        b"\x04\xe0\x2d\xe5",  # armel32_prolog_2
        b"\xe9\x2d\x40\x00",  # arm32_prolog_1 instance
        b"\x48\x83\xec\x10",  # amd64_prolog_2 instance
        b"\xe5\x2d\xe0\x04",  # arm32_prolog_2
        b"\x27\xbd\xff\xe0",  # mips32_prolog_1 instance
        b"\x30\x10\x2d\xe9",  # armel32_prolog_1 instance
        b"\xe0\xff\xbd\x27",  # mips32el_prolog_1 instance
        b"\x7d\x10\x20\x1e",  # SPE isel instance
    ]
    rng = np.random.default_rng(seed)
    common = rng.dirichlet(np.full(256, 2.0))
    specs = []
    for i, name in enumerate(names):
        dist = _mixed_distribution(rng, common, distinct_weight)
        specs.append(SyntheticClass(name, dist, ((salts[i % len(salts)], 0.01),)))
    return specs


def ablation_specs(seed: int = 42):
    """Four class pairs identical in byte histogram, split only by signatures.

    Each pair shares a base distribution and is salted with byte-string
    pairs that are permutations of each other (identical histogram
    impact): endianness markers for two pairs, byte-swapped prolog or
    epilog instances for the other two.  Histogram-only features cannot
    separate a pair; the endianness features resolve the first two; the
    full signature set resolves all four.
    """
    rng = np.random.default_rng(seed)
    common = rng.dirichlet(np.full(256, 2.0))
    pairs = [
        ("mips", "mipsel", b"\x00\x01", b"\x01\x00"),
        ("ppc64", "ppc64el", b"\xff\xfe", b"\xfe\xff"),
        ("armel", "armhf", b"\x04\xe0\x2d\xe5", b"\xe5\x2d\xe0\x04"),
        ("powerpc", "sparc",
         b"\x04\xe0\x9d\xe4\x1e\xff\x2f\xe1", b"\xe4\x9d\xe0\x04\xe1\x2f\xff\x1e"),
    ]
    specs = []
    for name_a, name_b, salt_a, salt_b in pairs:
        dist = _mixed_distribution(rng, common, 0.5)
        specs.append(SyntheticClass(name_a, dist, ((salt_a, 0.02),)))
        specs.append(SyntheticClass(name_b, dist, ((salt_b, 0.02),)))
    return specs


def spe_pair_specs(seed: int = 42, salt_rate: float = 0.004):
    """A plain/SPE pair: identical base, one side salted with SPE opcodes."""
    rng = np.random.default_rng(seed)
    common = rng.dirichlet(np.full(256, 2.0))
    dist = _mixed_distribution(rng, common, 0.5)
    spe_salts = (
        (b"\x7d\x10\x20\x1e", salt_rate),   # isel form
        (b"\x10\x30\x40\xc1", salt_rate),   # vector-load form
    )
    return [
        SyntheticClass("powerpc", dist, ()),
        SyntheticClass("powerpcspe", dist, spe_salts),
    ]


def generate_code(spec: SyntheticClass, length: int, rng) -> bytes:
    buf = rng.choice(256, size=length, p=spec.byte_dist).astype(np.uint8)
    for salt, rate in spec.salts:
        count = int(round(rate * length / len(salt)))
        if count == 0 or length < len(salt):
            continue
        positions = rng.integers(0, length - len(salt) + 1, size=count)
        salt_arr = np.frombuffer(salt, dtype=np.uint8)
        for pos in positions:
            buf[pos:pos + len(salt)] = salt_arr
    return buf.tobytes()


_ASCII = np.frombuffer(
    b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_./ ", dtype=np.uint8
)


def _noise_block(rng, length: int) -> np.ndarray:
    """Class-independent header/data filler: zero runs plus ascii-ish bytes."""
    out = np.zeros(length, dtype=np.uint8)
    ascii_mask = rng.random(length) < 0.45
    out[ascii_mask] = rng.choice(_ASCII, size=int(ascii_mask.sum()))
    sprinkle = rng.random(length) < 0.05
    out[sprinkle] = rng.integers(0, 256, size=int(sprinkle.sum()))
    return out


def generate_complete_binary(code: bytes, rng) -> bytes:
    """Wrap code with header and data padding drawn from a shared noise model."""
    header = _noise_block(rng, int(rng.integers(256, 1025)))
    data = _noise_block(rng, max(1, int(len(code) * rng.uniform(0.75, 1.25))))
    return header.tobytes() + code + data.tobytes()


def generate_dataset(specs, per_class: int, length: int, seed: int = 42,
                     complete: bool = False) -> list[RawSample]:
    """Seeded RawSamples, per_class samples for every spec."""
    rng = np.random.default_rng(seed)
    mode = "complete_binary" if complete else "code_only"
    out = []
    for spec in specs:
        for i in range(per_class):
            code = generate_code(spec, length, rng)
            data = generate_complete_binary(code, rng) if complete else code
            out.append(RawSample(
                label=spec.name, data=data,
                source=f"synth://{spec.name}/{i}", mode=mode,
            ))
    return out


def paired_regime_dataset(specs, per_class: int, length: int, seed: int = 42):
    """Aligned (code_only, complete_binary) sample lists over the same code."""
    rng = np.random.default_rng(seed)
    code_samples = []
    complete_samples = []
    for spec in specs:
        for i in range(per_class):
            code = generate_code(spec, length, rng)
            complete = generate_complete_binary(code, rng)
            code_samples.append(RawSample(
                label=spec.name, data=code,
                source=f"synth://{spec.name}/{i}", mode="code_only",
            ))
            complete_samples.append(RawSample(
                label=spec.name, data=complete,
                source=f"synth://{spec.name}/{i}", mode="complete_binary",
            ))
    return code_samples, complete_samples


# --- minimal ELF writer -------------------------------------------------

_SHF_WRITE_ALLOC = 0x3
_SHF_ALLOC_EXEC = 0x6


def make_elf(code_sections, data_sections=(), elf_class: int = 64,
             little: bool = True, machine: int = 62) -> bytes:
    """A small but valid ELF with the given section contents.

    code_sections and data_sections are byte strings; code sections are
    flagged execute-instructions.  Enough structure for section-table
    parsers; no program headers.
    """
    end = "<" if little else ">"
    is64 = elf_class == 64
    ehsize = 64 if is64 else 52
    shentsize = 64 if is64 else 40

    names = [""]
    names += [".text" if i == 0 else f".text{i}" for i in range(len(code_sections))]
    names += [".data" if i == 0 else f".data{i}" for i in range(len(data_sections))]
    names.append(".shstrtab")
    strtab = b"\x00"
    name_offsets = {}
    for n in names[1:]:
        name_offsets[n] = len(strtab)
        strtab += n.encode() + b"\x00"

    contents = list(code_sections) + list(data_sections) + [strtab]
    offsets = []
    cursor = ehsize
    for blob in contents:
        offsets.append(cursor)
        cursor += len(blob)
    shoff = cursor + (-cursor % 8)
    shnum = len(contents) + 1  # leading NULL entry

    def shdr(name_off, sh_type, flags, offset, size):
        if is64:
            return struct.pack(end + "IIQQQQIIQQ", name_off, sh_type, flags,
                               0, offset, size, 0, 0, 8, 0)
        return struct.pack(end + "IIIIIIIIII", name_off, sh_type, flags,
                           0, offset, size, 0, 0, 4, 0)

    table = [b"\x00" * shentsize]
    idx = 0
    for i, blob in enumerate(code_sections):
        name = ".text" if i == 0 else f".text{i}"
        table.append(shdr(name_offsets[name], 1, _SHF_ALLOC_EXEC, offsets[idx], len(blob)))
        idx += 1
    for i, blob in enumerate(data_sections):
        name = ".data" if i == 0 else f".data{i}"
        table.append(shdr(name_offsets[name], 1, _SHF_WRITE_ALLOC, offsets[idx], len(blob)))
        idx += 1
    table.append(shdr(name_offsets[".shstrtab"], 3, 0, offsets[idx], len(strtab)))

    ident = b"\x7fELF" + bytes([2 if is64 else 1, 1 if little else 2, 1]) + b"\x00" * 9
    if is64:
        ehdr = ident + struct.pack(end + "HHIQQQIHHHHHH",
                                   2, machine, 1, 0, 0, shoff, 0,
                                   ehsize, 56, 0, shentsize, shnum, shnum - 1)
    else:
        ehdr = ident + struct.pack(end + "HHIIIIIHHHHHH",
                                   2, machine, 1, 0, 0, shoff, 0,
                                   ehsize, 32, 0, shentsize, shnum, shnum - 1)

    body = bytearray(ehdr)
    for blob, off in zip(contents, offsets):
        assert len(body) == off
        body += blob
    body += b"\x00" * (shoff - len(body))
    for entry in table:
        body += entry
    return bytes(body)


def make_elf_segments_only(code: bytes, elf_class: int = 64, little: bool = True,
                           machine: int = 62) -> bytes:
    """A stripped-style ELF: program headers only, no section table."""
    end = "<" if little else ">"
    is64 = elf_class == 64
    ehsize = 64 if is64 else 52
    phentsize = 56 if is64 else 32
    phoff = ehsize
    code_off = phoff + phentsize

    if is64:
        phdr = struct.pack(end + "IIQQQQQQ", 1, 0x5, code_off, 0x400000, 0x400000,
                           len(code), len(code), 0x1000)
    else:
        phdr = struct.pack(end + "IIIIIIII", 1, code_off, 0x400000, 0x400000,
                           len(code), len(code), 0x5, 0x1000)

    ident = b"\x7fELF" + bytes([2 if is64 else 1, 1 if little else 2, 1]) + b"\x00" * 9
    if is64:
        ehdr = ident + struct.pack(end + "HHIQQQIHHHHHH",
                                   2, machine, 1, 0x400000, phoff, 0, 0,
                                   ehsize, phentsize, 1, 64, 0, 0)
    else:
        ehdr = ident + struct.pack(end + "HHIIIIIHHHHHH",
                                   2, machine, 1, 0x400000, phoff, 0, 0,
                                   ehsize, phentsize, 1, 40, 0, 0)
    return ehdr + phdr + code


def write_corpus(root, specs, per_class: int, length: int, seed: int = 42,
                 container: str = "elf", complete: bool = False) -> int:
    """Materialize a corpus tree <root>/<arch>/<file> for CLI runs.

    container="elf" wraps each sample's code in a one-section ELF;
    container="raw" writes bare bytes.  Returns the file count.
    """
    root = Path(root)
    samples = generate_dataset(specs, per_class, length, seed=seed, complete=complete)
    written = 0
    for sample in samples:
        sub = root / sample.label
        sub.mkdir(parents=True, exist_ok=True)
        if container == "elf" and not complete:
            payload = make_elf([sample.data])
        else:
            payload = sample.data
        name = f"sample_{written:05d}.bin"
        (sub / name).write_bytes(payload)
        written += 1
    return written
