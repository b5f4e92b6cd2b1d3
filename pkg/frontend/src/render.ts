import type { SegmentationState } from "./types.js";
import type { OverlayMode } from "./controller.js";

/** Parse "#rrggbb" to [r, g, b]. */
export function hexToRgb(hex: string): [number, number, number] {
  const value = parseInt(hex.replace("#", ""), 16);
  return [(value >> 16) & 0xff, (value >> 8) & 0xff, value & 0xff];
}

const PROVENANCE_COLORS: [number, number, number][] = [
  [0, 0, 0], // unlabeled
  [255, 214, 10], // mode-assigned
  [255, 69, 58], // queried
  [191, 90, 242], // fallback
  [10, 132, 255], // propagated
];

/**
 * RGBA pixels for the class or provenance overlay, full-image size.
 * Pixels outside the segmentation scope stay transparent.
 */
export function overlayImage(
  seg: SegmentationState,
  palette: string[],
  rows: number,
  cols: number,
  mode: OverlayMode,
  alpha = 200,
): Uint8ClampedArray {
  const out = new Uint8ClampedArray(rows * cols * 4);
  if (mode === "none") return out;
  const classColors = palette.map(hexToRgb);
  for (let i = 0; i < seg.labels.length; i++) {
    const [row, col] = seg.pixel_index[i]!;
    const base = (row * cols + col) * 4;
    let color: [number, number, number] | undefined;
    if (mode === "segmentation") {
      const label = seg.labels[i]!;
      if (label > 0) color = classColors[label - 1];
    } else {
      color = PROVENANCE_COLORS[seg.provenance[i]!];
      if (seg.provenance[i] === 0) color = undefined;
    }
    if (!color) continue;
    out[base] = color[0];
    out[base + 1] = color[1];
    out[base + 2] = color[2];
    out[base + 3] = alpha;
  }
  return out;
}

/** Polyline points for a spectrum plot inside a w x h box (y grows down). */
export function spectrumPath(
  spectrum: number[],
  width: number,
  height: number,
  pad = 4,
): [number, number][] {
  if (spectrum.length === 0) return [];
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of spectrum) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const span = hi > lo ? hi - lo : 1;
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;
  const step = spectrum.length > 1 ? innerW / (spectrum.length - 1) : 0;
  return spectrum.map((v, i) => [
    pad + i * step,
    pad + innerH * (1 - (v - lo) / span),
  ]);
}

export function drawSpectrum(
  canvas: HTMLCanvasElement,
  spectrum: number[],
): void {
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#11151c";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const path = spectrumPath(spectrum, canvas.width, canvas.height);
  if (path.length === 0) return;
  ctx.beginPath();
  ctx.moveTo(path[0]![0], path[0]![1]);
  for (const [x, y] of path.slice(1)) ctx.lineTo(x, y);
  ctx.strokeStyle = "#64d2ff";
  ctx.lineWidth = 1.5;
  ctx.stroke();
}

export function drawCrosshair(
  ctx: CanvasRenderingContext2D,
  x: number,
  y: number,
  scale: number,
): void {
  ctx.save();
  ctx.strokeStyle = "#ff453a";
  ctx.lineWidth = 2;
  const r = Math.max(6, scale);
  ctx.beginPath();
  ctx.arc(x, y, r, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(x - r - 4, y);
  ctx.lineTo(x - r + 2, y);
  ctx.moveTo(x + r - 2, y);
  ctx.lineTo(x + r + 4, y);
  ctx.moveTo(x, y - r - 4);
  ctx.lineTo(x, y - r + 2);
  ctx.moveTo(x, y + r - 2);
  ctx.lineTo(x, y + r + 4);
  ctx.stroke();
  ctx.restore();
}

/** Draw a base64 PNG tile scaled up with a center marker. */
export async function drawContextTile(
  canvas: HTMLCanvasElement,
  pngBase64: string,
  centerRow: number,
  centerCol: number,
): Promise<void> {
  const ctx = canvas.getContext("2d")!;
  const blob = await (
    await fetch(`data:image/png;base64,${pngBase64}`)
  ).blob();
  const bitmap = await createImageBitmap(blob);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const scale = Math.min(
    canvas.width / bitmap.width,
    canvas.height / bitmap.height,
  );
  const w = bitmap.width * scale;
  const h = bitmap.height * scale;
  const ox = (canvas.width - w) / 2;
  const oy = (canvas.height - h) / 2;
  ctx.drawImage(bitmap, ox, oy, w, h);
  drawCrosshair(
    ctx,
    ox + (centerCol + 0.5) * scale,
    oy + (centerRow + 0.5) * scale,
    scale / 2,
  );
}
