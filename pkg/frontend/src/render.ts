/** Canvas renderer: K boxes, hover attributes, top-3 attention outlines.
 *
 * The overlay is pure presentation of the latest trace — fill opacity
 * follows the attention weight, outline color follows the rank order
 * computed in state.ts.
 */

import { overlayRanking, RANK_COLORS } from "./state.js";
import { ObjectJson, SceneJson, TraceJson } from "./types.js";

const FILL: Record<string, string> = {
  red: "#c0392b",
  blue: "#2980b9",
  green: "#27ae60",
  yellow: "#f1c40f",
  black: "#2c3e50",
  white: "#bdc3c7",
};

export interface Shape {
  index: number;
  object: ObjectJson;
  /** Canvas-pixel rectangle [x, y, w, h]. */
  rect: [number, number, number, number];
}

/** One shape per scene object, scaled to the canvas size. */
export function sceneShapes(
  scene: SceneJson,
  width: number,
  height: number,
): Shape[] {
  return scene.objects.map((object, index) => {
    const [x0, y0, x1, y1] = object.bbox;
    return {
      index,
      object,
      rect: [x0 * width, y0 * height, (x1 - x0) * width, (y1 - y0) * height],
    };
  });
}

export function shapeAt(shapes: Shape[], x: number, y: number): Shape | null {
  // later shapes draw on top, so hit-test back to front
  for (let i = shapes.length - 1; i >= 0; i--) {
    const s = shapes[i]!;
    const [rx, ry, rw, rh] = s.rect;
    if (x >= rx && x <= rx + rw && y >= ry && y <= ry + rh) {
      return s;
    }
  }
  return null;
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  scene: SceneJson,
  trace: TraceJson | undefined,
  hover: Shape | null,
): Shape[] {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#fdfdfb";
  ctx.fillRect(0, 0, width, height);

  const shapes = sceneShapes(scene, width, height);
  const ranking = overlayRanking(trace);
  const att = trace && ranking.length > 0 ? trace.att : null;
  const peak = att ? Math.max(...att) : 1;

  for (const shape of shapes) {
    const [x, y, w, h] = shape.rect;
    // attention as opacity: flat 0.45 with no overlay, else weight/peak
    const weight = att ? att[shape.index]! / peak : 1;
    ctx.globalAlpha = att ? 0.15 + 0.65 * weight : 0.45;
    ctx.fillStyle = FILL[shape.object.color] ?? "#7f8c8d";
    ctx.fillRect(x, y, w, h);
    ctx.globalAlpha = 1;
    ctx.strokeStyle = "#555";
    ctx.lineWidth = 1;
    ctx.strokeRect(x, y, w, h);
    ctx.fillStyle = "#333";
    ctx.font = "11px sans-serif";
    ctx.fillText(`${shape.index}`, x + 3, y + 12);
  }

  ranking.forEach((index, rank) => {
    const [x, y, w, h] = shapes[index]!.rect;
    ctx.strokeStyle = RANK_COLORS[rank]!;
    ctx.lineWidth = 3;
    ctx.strokeRect(x - 2, y - 2, w + 4, h + 4);
  });

  if (hover) {
    const { category, color, size } = hover.object;
    const label = `#${hover.index}: ${size} ${color} ${category}`;
    const [x, y] = hover.rect;
    ctx.font = "12px sans-serif";
    const tw = ctx.measureText(label).width + 10;
    const ty = Math.max(y - 22, 2);
    ctx.fillStyle = "rgba(40, 40, 40, 0.9)";
    ctx.fillRect(x, ty, tw, 18);
    ctx.fillStyle = "#fff";
    ctx.fillText(label, x + 5, ty + 13);
  }
  return shapes;
}
