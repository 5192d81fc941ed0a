export {
    decodeMask,
    layoutDigestOf,
    loadMask,
    parseLayout,
    parseSchedule,
    WireFormatError,
} from "./wire.js";
export type { BridgeMask, LayoutInfo, MaskMode, Modality, Owner, TokenTag } from "./wire.js";
export {
    applyMask,
    createAttentionHook,
    createStagedHook,
    maskedAttention,
    matmul,
} from "./attention.js";
export type { Matrix } from "./attention.js";
