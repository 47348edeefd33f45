"""Executable parsing, code-section extraction, labels and corpus ingestion.

ELF reading is deliberately self-contained (struct over the raw buffer,
no external parser) because inputs are frequently hostile or truncated:
every offset is bounds-checked and parse failures surface as exceptions,
never as reads past the buffer.
"""

from __future__ import annotations

import logging
import random
import struct
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    EmptyCorpus,
    FragmentTooLarge,
    MalformedHeader,
    NoCodeSections,
    NotElf,
    UnknownArchitectureDirectory,
)

log = logging.getLogger(__name__)

ELF_MAGIC = b"\x7fELF"

# Architecture catalog: name -> (endianness, wordsize).  Endianness and
# word size are a pure function of the class name; they are never
# re-derived from file headers at prediction time.
ARCHITECTURES = {
    "alpha": ("little", 64),
    "amd64": ("little", 64),
    "arm64": ("little", 64),
    "armel": ("little", 32),
    "armhf": ("little", 32),
    "hppa": ("big", 32),
    "i386": ("little", 32),
    "ia64": ("little", 64),
    "m68k": ("big", 32),
    "mips": ("big", 32),
    "mips64el": ("little", 64),
    "mipsel": ("little", 32),
    "powerpc": ("big", 32),
    "powerpcspe": ("big", 32),
    "ppc64": ("big", 64),
    "ppc64el": ("little", 64),
    "riscv64": ("little", 64),
    "s390": ("big", 32),
    "s390x": ("big", 64),
    "sh4": ("little", 32),
    "sparc": ("big", 32),
    "sparc64": ("big", 64),
    "x32": ("little", 32),
}

ARCH_NAMES = sorted(ARCHITECTURES)


@dataclass(frozen=True)
class ArchitectureLabel:
    name: str
    endianness: str
    wordsize: int


def label_for(name: str) -> ArchitectureLabel:
    if name not in ARCHITECTURES:
        raise UnknownArchitectureDirectory(f"unknown architecture name: {name!r}")
    endianness, wordsize = ARCHITECTURES[name]
    return ArchitectureLabel(name, endianness, wordsize)


@dataclass(frozen=True)
class CodeRegion:
    offset: int
    length: int
    section_name: str


@dataclass(frozen=True)
class BinaryImage:
    raw_bytes: bytes
    source_path: str = "<memory>"

    @property
    def format(self) -> str:
        return "elf" if self.raw_bytes[:4] == ELF_MAGIC else "raw"


def load_image(path) -> BinaryImage:
    data = Path(path).read_bytes()
    return BinaryImage(raw_bytes=data, source_path=str(path))


@dataclass(frozen=True)
class ElfInfo:
    elf_class: int            # 32 or 64
    data_encoding: str        # "LSB" or "MSB"
    machine: int
    code_regions: tuple[CodeRegion, ...]


_SHF_EXECINSTR = 0x4
_SHT_NOBITS = 8
_PT_LOAD = 1
_PF_X = 0x1


def parse_elf(image: BinaryImage) -> ElfInfo:
    """Decode the ELF header and collect executable code regions.

    Code regions are the sections flagged execute-instructions, in
    section-table order.  When the section-header table is absent or
    inconsistent, executable PT_LOAD segments are used instead.
    """
    data = image.raw_bytes
    if data[:4] != ELF_MAGIC:
        raise NotElf(f"{image.source_path}: bad magic")
    if len(data) < 52:
        raise MalformedHeader(f"{image.source_path}: only {len(data)} bytes, header cannot fit")

    ei_class = data[4]
    ei_data = data[5]
    if ei_class not in (1, 2):
        raise MalformedHeader(f"{image.source_path}: bad EI_CLASS {ei_class}")
    if ei_data not in (1, 2):
        raise MalformedHeader(f"{image.source_path}: bad EI_DATA {ei_data}")
    is64 = ei_class == 2
    end = "<" if ei_data == 1 else ">"
    if is64 and len(data) < 64:
        raise MalformedHeader(f"{image.source_path}: truncated ELF64 header")

    machine = struct.unpack_from(end + "H", data, 18)[0]
    if is64:
        (e_phoff, e_shoff) = struct.unpack_from(end + "QQ", data, 32)
        (e_phentsize, e_phnum, e_shentsize, e_shnum, e_shstrndx) = struct.unpack_from(
            end + "HHHHH", data, 54
        )
        sh_struct, sh_size = end + "IIQQQQIIQQ", 64
        ph_struct, ph_size = end + "IIQQQQQQ", 56
    else:
        (e_phoff, e_shoff) = struct.unpack_from(end + "II", data, 28)
        (e_phentsize, e_phnum, e_shentsize, e_shnum, e_shstrndx) = struct.unpack_from(
            end + "HHHHH", data, 42
        )
        sh_struct, sh_size = end + "IIIIIIIIII", 40
        ph_struct, ph_size = end + "IIIIIIII", 32

    regions = _exec_sections(image, data, e_shoff, e_shentsize, e_shnum, e_shstrndx, sh_struct, sh_size)
    if regions is None:
        regions = _exec_segments(data, e_phoff, e_phentsize, e_phnum, ph_struct, ph_size, is64)

    return ElfInfo(
        elf_class=64 if is64 else 32,
        data_encoding="LSB" if ei_data == 1 else "MSB",
        machine=machine,
        code_regions=tuple(regions),
    )


def _exec_sections(image, data, shoff, entsize, shnum, shstrndx, sh_struct, sh_size):
    """Executable sections in table order, or None if the table is unusable."""
    if shoff == 0 or shnum == 0:
        return None
    if entsize < sh_size or shoff + entsize * shnum > len(data):
        log.warning("%s: section header table out of bounds, falling back to segments",
                    image.source_path)
        return None

    headers = []
    for i in range(shnum):
        headers.append(struct.unpack_from(sh_struct, data, shoff + i * entsize))

    # Section-name string table, used on a best-effort basis.
    strtab = b""
    if 0 < shstrndx < shnum:
        _, st_type, _, _, st_off, st_sz = headers[shstrndx][:6]
        if st_type != _SHT_NOBITS and st_off + st_sz <= len(data):
            strtab = data[st_off:st_off + st_sz]

    regions = []
    for i, hdr in enumerate(headers):
        sh_name, sh_type, sh_flags, _, sh_offset, sh_sz = hdr[:6]
        if not (sh_flags & _SHF_EXECINSTR) or sh_type == _SHT_NOBITS or sh_sz == 0:
            continue
        if sh_offset + sh_sz > len(data):
            log.warning("%s: executable section %d exceeds file, falling back to segments",
                        image.source_path, i)
            return None
        name = _strtab_name(strtab, sh_name) or f"section_{i}"
        regions.append(CodeRegion(offset=sh_offset, length=sh_sz, section_name=name))
    return regions


def _strtab_name(strtab: bytes, offset: int) -> str:
    if not strtab or offset >= len(strtab):
        return ""
    nul = strtab.find(b"\x00", offset)
    if nul < 0:
        nul = len(strtab)
    try:
        return strtab[offset:nul].decode("utf-8")
    except UnicodeDecodeError:
        return ""


def _exec_segments(data, phoff, entsize, phnum, ph_struct, ph_size, is64):
    regions = []
    if phoff == 0 or phnum == 0 or entsize < ph_size or phoff + entsize * phnum > len(data):
        return regions
    for i in range(phnum):
        fields = struct.unpack_from(ph_struct, data, phoff + i * entsize)
        if is64:
            p_type, p_flags, p_offset, _, _, p_filesz = fields[:6]
        else:
            p_type, p_offset, _, _, p_filesz, _, p_flags, _ = fields
        if p_type != _PT_LOAD or not (p_flags & _PF_X) or p_filesz == 0:
            continue
        if p_offset + p_filesz > len(data):
            continue
        regions.append(CodeRegion(offset=p_offset, length=p_filesz, section_name=f"segment_{i}"))
    return regions


def concat_code(image: BinaryImage) -> bytes:
    """All executable regions of the image concatenated in table order."""
    info = parse_elf(image)
    if not info.code_regions:
        raise NoCodeSections(f"{image.source_path}: no executable sections or segments")
    return b"".join(
        image.raw_bytes[r.offset:r.offset + r.length] for r in info.code_regions
    )


def filter_sample(image: BinaryImage, min_code_bytes: int = 4000) -> bool:
    """True when the image's concatenated code is at least min_code_bytes.

    The threshold is inclusive.  Unparseable or code-free images are
    simply filtered out (False), never raised from here.
    """
    try:
        return len(concat_code(image)) >= min_code_bytes
    except (NotElf, MalformedHeader, NoCodeSections):
        return False


def sample_fragment(code: bytes, size: int, rng_seed: int) -> bytes:
    """A contiguous slice of exactly `size` bytes at a seeded uniform offset."""
    if size < 1 or size > len(code):
        raise FragmentTooLarge(f"fragment size {size} invalid for {len(code)} code bytes")
    offset = random.Random(rng_seed).randint(0, len(code) - size)
    return code[offset:offset + size]


@dataclass(frozen=True)
class RawSample:
    """Label plus the exact byte sequence an experiment will featurize."""
    label: str
    data: bytes
    source: str
    mode: str  # "code_only" or "complete_binary"


def scan_corpus(
    root_dir,
    mode: str = "code_only",
    min_code_bytes: int = 4000,
    per_class_cap: int = 3000,
    cap_seed: int | None = None,
) -> list[RawSample]:
    """Collect labeled byte sequences from a <root>/<arch>/<files> tree.

    Ground truth is the architecture directory name.  code_only mode
    extracts concatenated executable regions and drops samples whose code
    is below min_code_bytes; complete_binary mode takes whole files as-is
    (raw, non-ELF files included).  Selection under per_class_cap is
    lexicographic by default, or seeded-random when cap_seed is given.
    """
    if mode not in ("code_only", "complete_binary"):
        raise ValueError(f"unknown mode {mode!r}")
    root = Path(root_dir)
    subdirs = sorted(p for p in root.iterdir() if p.is_dir())
    for sub in subdirs:
        if sub.name not in ARCHITECTURES:
            raise UnknownArchitectureDirectory(
                f"directory {sub.name!r} under {root} is not a known architecture"
            )

    out: list[RawSample] = []
    for sub in subdirs:
        label = label_for(sub.name)
        files = sorted(p for p in sub.rglob("*") if p.is_file() and not p.name.startswith("."))
        picked = []
        for path in files:
            image = load_image(path)
            if mode == "code_only":
                if not filter_sample(image, min_code_bytes):
                    log.info("skipping %s: below code threshold or not parseable", path)
                    continue
                _warn_on_endianness_mismatch(image, label)
                data = concat_code(image)
            else:
                data = image.raw_bytes
                if not data:
                    log.warning("skipping empty file %s", path)
                    continue
            picked.append(RawSample(label=label.name, data=data, source=str(path), mode=mode))
            if cap_seed is None and len(picked) >= per_class_cap:
                break
        if cap_seed is not None and len(picked) > per_class_cap:
            rng = random.Random(cap_seed)
            keep = sorted(rng.sample(range(len(picked)), per_class_cap))
            picked = [picked[i] for i in keep]
        out.extend(picked)

    if not out:
        raise EmptyCorpus(f"no usable samples under {root}")
    return out


def _warn_on_endianness_mismatch(image: BinaryImage, label: ArchitectureLabel) -> None:
    try:
        info = parse_elf(image)
    except (NotElf, MalformedHeader):
        return
    header_end = "little" if info.data_encoding == "LSB" else "big"
    if header_end != label.endianness:
        log.warning(
            "%s: header says %s-endian but directory label %s implies %s-endian",
            image.source_path, header_end, label.name, label.endianness,
        )


def ingest_corpus(
    root_dir,
    mode: str = "code_only",
    min_code_bytes: int = 4000,
    per_class_cap: int = 3000,
    jobs: int = 1,
    cap_seed: int | None = None,
):
    """scan_corpus plus feature extraction; returns features.LabeledSample list.

    Extraction may run in a process pool (jobs > 1); output order is the
    deterministic scan order regardless of worker count.
    """
    from . import features

    raws = scan_corpus(root_dir, mode, min_code_bytes, per_class_cap, cap_seed)
    return features.featurize_raw_samples(raws, jobs=jobs)
