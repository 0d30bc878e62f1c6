// Preview fidelity: every primitive of every bundled scenario must land at
// the pixel position given by an independently computed orthographic
// transform of its configured world coordinates, exactly to rounding.
import { readFileSync, readdirSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { pixelsPerMetre, previewDrawOps, viewportFor } from "../src/projection.js";
import type { SceneGeometry } from "../src/types.js";

const FIXTURES = join(__dirname, "fixtures");
const WIDTH = 420;
const HEIGHT = 420;

const scenarioFiles = readdirSync(FIXTURES).filter((f) => f.startsWith("preview_"));

function loadScene(file: string): SceneGeometry {
  return JSON.parse(readFileSync(join(FIXTURES, file), "utf-8")) as SceneGeometry;
}

describe("scenario previews place primitives at configured coordinates", () => {
  it("covers all four bundled scenarios", () => {
    expect(scenarioFiles.length).toBe(4);
  });

  for (const file of scenarioFiles) {
    const scene = loadScene(file);

    for (const view of ["lateral", "frontal"] as const) {
      it(`${file} / ${view}: one op per primitive plus the skeleton`, () => {
        const vp = viewportFor(scene, WIDTH, HEIGHT);
        const ops = previewDrawOps(scene, view, vp);
        expect(ops.length).toBe(scene.primitives.length + 1);
        expect(ops[ops.length - 1].kind).toBe("polyline");
      });

      it(`${file} / ${view}: pixel positions match the orthographic transform`, () => {
        const vp = viewportFor(scene, WIDTH, HEIGHT);
        const ops = previewDrawOps(scene, view, vp);
        // independent transform: scale = min(w,h) / (2 * 1.15 * reach);
        // horizontal axis is world x (lateral view) or world y (frontal),
        // vertical axis is world z, y grows downward on screen
        const scale = Math.min(WIDTH, HEIGHT) / (2 * 1.15 * scene.reach);
        scene.primitives.forEach((prim, i) => {
          const op = ops[i];
          const h = view === "lateral" ? prim.centre[0] : prim.centre[1];
          const v = prim.centre[2];
          const px = WIDTH / 2 + scale * h;
          const py = HEIGHT / 2 - scale * v;
          expect(Math.round(op.x)).toBe(Math.round(px));
          expect(Math.round(op.y)).toBe(Math.round(py));
          expect(op.role).toBe(prim.role);
          expect(op.index).toBe(prim.index);
          if (prim.type === "sphere") {
            expect(op.kind).toBe("circle");
            expect(op.radius).toBeCloseTo(scale * (prim.radius ?? 0), 9);
          } else {
            expect(op.kind).toBe("rect");
            const size = prim.size ?? [0, 0, 0];
            const wAxis = view === "lateral" ? size[0] : size[1];
            expect(op.halfW).toBeCloseTo((scale * wAxis) / 2, 9);
            expect(op.halfH).toBeCloseTo((scale * size[2]) / 2, 9);
          }
        });
      });

      it(`${file} / ${view}: skeleton joints transform like any other point`, () => {
        const vp = viewportFor(scene, WIDTH, HEIGHT);
        const ops = previewDrawOps(scene, view, vp);
        const poly = ops[ops.length - 1];
        const scale = pixelsPerMetre(vp);
        expect(poly.points?.length).toBe(scene.skeleton.length);
        scene.skeleton.forEach((joint, j) => {
          const h = view === "lateral" ? joint[0] : joint[1];
          expect(poly.points![j].x).toBeCloseTo(WIDTH / 2 + scale * h, 9);
          expect(poly.points![j].y).toBeCloseTo(HEIGHT / 2 - scale * joint[2], 9);
        });
      });
    }
  }

  it("shoulder sits at the canvas centre and the whole reach sphere fits", () => {
    const scene = loadScene(scenarioFiles[0]);
    const vp = viewportFor(scene, WIDTH, HEIGHT);
    const scale = pixelsPerMetre(vp);
    // shoulder = world origin
    expect(WIDTH / 2 + scale * 0).toBe(WIDTH / 2);
    // the reach sphere (radius `reach`) must fit inside the viewport
    expect(scale * scene.reach).toBeLessThanOrEqual(Math.min(WIDTH, HEIGHT) / 2);
  });
});
