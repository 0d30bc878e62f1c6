/** Orthographic world-to-pixel transforms for the two fixed camera views.
 *
 * The lateral view looks along the y axis (screen: world x rightward,
 * world z upward); the frontal view looks along the x axis (screen:
 * world y rightward, world z upward).
 */

import { PreviewPrimitive, SceneGeometry } from "./types.js";

export type View = "lateral" | "frontal";

export interface Viewport {
  width: number;
  height: number;
  /** Half-extent of the world square mapped onto the viewport, metres. */
  worldHalfExtent: number;
}

export function viewportFor(scene: SceneGeometry, width: number, height: number): Viewport {
  return { width, height, worldHalfExtent: scene.reach * 1.15 };
}

/** Metres-per-viewport scale factor (pixels per metre). */
export function pixelsPerMetre(vp: Viewport): number {
  return Math.min(vp.width, vp.height) / (2 * vp.worldHalfExtent);
}

/** Project a world point [x, y, z] into pixel coordinates for a view. */
export function projectPoint(p: number[], view: View, vp: Viewport): { x: number; y: number } {
  const s = pixelsPerMetre(vp);
  const h = view === "lateral" ? p[0] : p[1];
  const v = p[2];
  return { x: vp.width / 2 + s * h, y: vp.height / 2 - s * v };
}

export interface DrawOp {
  kind: "circle" | "rect" | "polyline";
  role: string;
  index: number;
  x: number;
  y: number;
  /** circle radius or [w, h] rect half-sizes, pixels */
  radius?: number;
  halfW?: number;
  halfH?: number;
  rotationDeg?: number;
  points?: { x: number; y: number }[];
  colour: string;
  alpha: number;
}

function css(colour: number[]): string {
  const [r, g, b] = colour.map((c) => Math.round(255 * c));
  return `rgb(${r},${g},${b})`;
}

function boxHalfSizes(prim: PreviewPrimitive, view: View, s: number): { halfW: number; halfH: number } {
  const size = prim.size ?? [0, 0, 0];
  // size is [x, y, z] world extents; pick the two on-screen axes
  const w = view === "lateral" ? size[0] : size[1];
  return { halfW: (s * w) / 2, halfH: (s * size[2]) / 2 };
}

/** Flatten a scene into view-space draw commands (pure; canvas-free). */
export function previewDrawOps(scene: SceneGeometry, view: View, vp: Viewport): DrawOp[] {
  const s = pixelsPerMetre(vp);
  const ops: DrawOp[] = [];
  for (const prim of scene.primitives) {
    const { x, y } = projectPoint(prim.centre, view, vp);
    if (prim.type === "sphere") {
      ops.push({
        kind: "circle", role: prim.role, index: prim.index,
        x, y, radius: s * (prim.radius ?? 0),
        colour: css(prim.colour), alpha: prim.alpha,
      });
    } else {
      const { halfW, halfH } = boxHalfSizes(prim, view, s);
      ops.push({
        kind: "rect", role: prim.role, index: prim.index,
        x, y, halfW, halfH,
        rotationDeg: view === "lateral" ? prim.orientation_deg ?? 0 : 0,
        colour: css(prim.colour), alpha: prim.alpha,
      });
    }
  }
  ops.push({
    kind: "polyline", role: "skeleton", index: -1,
    x: 0, y: 0,
    points: scene.skeleton.map((p) => projectPoint(p, view, vp)),
    colour: "rgb(40,40,40)", alpha: 1.0,
  });
  return ops;
}

/** Render draw ops onto a 2D canvas context. */
export function renderOps(ctx: CanvasRenderingContext2D, ops: DrawOp[], vp: Viewport): void {
  ctx.clearRect(0, 0, vp.width, vp.height);
  for (const op of ops) {
    ctx.globalAlpha = op.alpha;
    if (op.kind === "circle") {
      ctx.fillStyle = op.colour;
      ctx.beginPath();
      ctx.arc(op.x, op.y, op.radius ?? 1, 0, 2 * Math.PI);
      ctx.fill();
    } else if (op.kind === "rect") {
      ctx.save();
      ctx.translate(op.x, op.y);
      ctx.rotate(((op.rotationDeg ?? 0) * Math.PI) / 180);
      ctx.fillStyle = op.colour;
      ctx.fillRect(-(op.halfW ?? 1), -(op.halfH ?? 1), 2 * (op.halfW ?? 1), 2 * (op.halfH ?? 1));
      ctx.restore();
    } else if (op.points) {
      ctx.strokeStyle = op.colour;
      ctx.lineWidth = 3;
      ctx.beginPath();
      op.points.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
      ctx.stroke();
      for (const p of op.points) {
        ctx.beginPath();
        ctx.arc(p.x, p.y, 4, 0, 2 * Math.PI);
        ctx.fillStyle = op.colour;
        ctx.fill();
      }
    }
  }
  ctx.globalAlpha = 1.0;
}
