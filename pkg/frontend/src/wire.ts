/**
 * Decoders for the exported artifact files: the "LAMK" mask binary, the
 * canonical token-layout JSON, and the plain-text stage schedule.
 *
 * The mask binary is a 50-byte header (magic, u32 LE version, u8 mode,
 * u64 LE token count, 32-byte layout digest, u8 flags) followed, when the
 * dense flag is set, by one bit-packed row per query: ceil(n/8) bytes,
 * LSB-first within each byte. The layout digest is the SHA-256 of the
 * layout file's exact bytes, so pairing can be verified without parsing.
 */

import { createHash } from "node:crypto";

export type MaskMode = "gia" | "rma";
export type Owner = number | "cei" | "uncontrolled";
export type Modality = "visual" | "textual" | "spatial";

export interface TokenTag {
    owner: Owner;
    modality: Modality;
}

export interface LayoutInfo {
    totalLen: number;
    tags: TokenTag[];
}

export interface BridgeMask {
    mode: MaskMode;
    totalLen: number;
    layoutDigest: Uint8Array;
    /** Row-major boolean matrix; row = query, column = key. */
    dense: boolean[][] | null;
}

export class WireFormatError extends Error {}

const MAGIC = "LAMK";
const WIRE_VERSION = 1;
const HEADER_SIZE = 4 + 4 + 1 + 8 + 32 + 1;
const FLAG_DENSE = 0x01;

export function decodeMask(data: Uint8Array): BridgeMask {
    if (data.length < HEADER_SIZE) {
        throw new WireFormatError("truncated payload");
    }
    const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
    const magic = String.fromCharCode(...data.subarray(0, 4));
    if (magic !== MAGIC) {
        throw new WireFormatError(`bad magic ${JSON.stringify(magic)}`);
    }
    const version = view.getUint32(4, true);
    if (version !== WIRE_VERSION) {
        throw new WireFormatError(`unsupported version ${version}`);
    }
    const modeByte = view.getUint8(8);
    if (modeByte !== 0 && modeByte !== 1) {
        throw new WireFormatError(`bad mode byte ${modeByte}`);
    }
    const totalLenBig = view.getBigUint64(9, true);
    if (totalLenBig > BigInt(Number.MAX_SAFE_INTEGER)) {
        throw new WireFormatError("token count too large");
    }
    const totalLen = Number(totalLenBig);
    const layoutDigest = data.slice(17, 49);
    const flags = view.getUint8(49);

    const rowBytes = Math.ceil(totalLen / 8);
    const expected = HEADER_SIZE + (flags & FLAG_DENSE ? totalLen * rowBytes : 0);
    if (data.length < expected) {
        throw new WireFormatError("truncated payload");
    }
    if (data.length > expected) {
        throw new WireFormatError("trailing bytes after payload");
    }

    let dense: boolean[][] | null = null;
    if (flags & FLAG_DENSE) {
        dense = [];
        for (let q = 0; q < totalLen; q++) {
            const row: boolean[] = new Array(totalLen);
            const base = HEADER_SIZE + q * rowBytes;
            for (let k = 0; k < totalLen; k++) {
                row[k] = ((data[base + (k >> 3)] >> (k & 7)) & 1) === 1;
            }
            dense.push(row);
        }
    }
    return {
        mode: modeByte === 0 ? "gia" : "rma",
        totalLen,
        layoutDigest,
        dense,
    };
}

export function layoutDigestOf(layoutFileBytes: Uint8Array): Uint8Array {
    return new Uint8Array(createHash("sha256").update(layoutFileBytes).digest());
}

/** Decode a mask and verify its digest against the paired layout file bytes. */
export function loadMask(data: Uint8Array, layoutFileBytes?: Uint8Array): BridgeMask {
    const mask = decodeMask(data);
    if (layoutFileBytes !== undefined) {
        const digest = layoutDigestOf(layoutFileBytes);
        for (let i = 0; i < 32; i++) {
            if (digest[i] !== mask.layoutDigest[i]) {
                throw new WireFormatError("layout digest mismatch");
            }
        }
    }
    return mask;
}

function ownerFromCode(code: unknown): Owner {
    if (typeof code === "number" && Number.isInteger(code) && code >= 1) {
        return code;
    }
    if (code === "cei") return "cei";
    if (code === "u") return "uncontrolled";
    throw new WireFormatError(`bad owner ${JSON.stringify(code)}`);
}

export function parseLayout(text: string): LayoutInfo {
    let obj: any;
    try {
        obj = JSON.parse(text);
    } catch (exc) {
        throw new WireFormatError(`malformed layout file: ${exc}`);
    }
    const totalLen: number = obj.total_len;
    const grid = obj.canvas_grid;
    if (!Number.isInteger(totalLen) || !Array.isArray(obj.spans) || !grid) {
        throw new WireFormatError("bad layout file");
    }
    const canvasTags: TokenTag[] = [];
    if (grid.rle !== "") {
        for (const item of String(grid.rle).split(",")) {
            const [code, count] = item.split(":");
            const owner = ownerFromCode(/^\d+$/.test(code) ? Number(code) : code);
            for (let i = 0; i < Number(count); i++) {
                canvasTags.push({ owner, modality: "spatial" });
            }
        }
    }
    if (canvasTags.length !== grid.w * grid.h) {
        throw new WireFormatError("canvas rle does not match grid dims");
    }
    const tags: TokenTag[] = [];
    for (const span of obj.spans) {
        if (span.start !== tags.length) {
            throw new WireFormatError("spans out of order");
        }
        if (span.canvas) {
            if (span.length !== canvasTags.length) {
                throw new WireFormatError("canvas span length does not match grid");
            }
            tags.push(...canvasTags);
        } else {
            const tag: TokenTag = {
                owner: ownerFromCode(span.owner),
                modality: span.modality,
            };
            for (let i = 0; i < span.length; i++) {
                tags.push(tag);
            }
        }
    }
    if (tags.length !== totalLen) {
        throw new WireFormatError("spans do not cover total_len");
    }
    return { totalLen, tags };
}

export function parseSchedule(text: string): MaskMode[] {
    const modes: MaskMode[] = [];
    for (const line of text.split("\n")) {
        const name = line.trim().toLowerCase();
        if (name === "") continue;
        if (name !== "gia" && name !== "rma") {
            throw new WireFormatError(`unknown mode ${JSON.stringify(line)}`);
        }
        modes.push(name);
    }
    return modes;
}
