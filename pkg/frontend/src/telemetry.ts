// Geometry for the score-vs-threshold strip. Pure math; the DOM layer just
// drops the numbers into an SVG.

import type { ScorePoint } from "./state.js";

export interface SparklineGeometry {
  width: number;
  height: number;
  thetaY: number;
  // one marker per scored turn; unscored turns (bypass) are skipped
  markers: Array<{ x: number; y: number; belowTheta: boolean }>;
  polyline: string;
}

// s_align lives in [-1, 1]; map it linearly onto the strip's pixel height
export function scoreToY(sAlign: number, height: number): number {
  const clamped = Math.max(-1, Math.min(1, sAlign));
  return ((1 - clamped) / 2) * height;
}

export function buildSparkline(
  points: ScorePoint[],
  theta: number,
  width = 320,
  height = 64,
): SparklineGeometry {
  const n = Math.max(points.length, 1);
  const step = width / n;
  const markers = [];
  const coords: string[] = [];
  for (let i = 0; i < points.length; i++) {
    const s = points[i].sAlign;
    if (s === null) {
      continue;
    }
    const x = step * i + step / 2;
    const y = scoreToY(s, height);
    markers.push({ x, y, belowTheta: s < theta });
    coords.push(`${x.toFixed(1)},${y.toFixed(1)}`);
  }
  return {
    width,
    height,
    thetaY: scoreToY(theta, height),
    markers,
    polyline: coords.join(" "),
  };
}
