/** Pure math for the rotatable 3D scatter: yaw/pitch rotation followed by
 * orthographic projection onto the screen plane. Kept free of DOM access
 * so it is unit-testable. */

export interface Point3 {
  x: number;
  y: number;
  z: number;
}

export interface Projected {
  screenX: number;
  screenY: number;
  depth: number;
}

/** Rotate around the Y axis (yaw), then the X axis (pitch). */
export function rotate(point: Point3, yaw: number, pitch: number): Point3 {
  const cosYaw = Math.cos(yaw);
  const sinYaw = Math.sin(yaw);
  const x1 = point.x * cosYaw + point.z * sinYaw;
  const z1 = -point.x * sinYaw + point.z * cosYaw;
  const cosPitch = Math.cos(pitch);
  const sinPitch = Math.sin(pitch);
  const y2 = point.y * cosPitch - z1 * sinPitch;
  const z2 = point.y * sinPitch + z1 * cosPitch;
  return { x: x1, y: y2, z: z2 };
}

/** Scale points to fit a viewport, preserving aspect ratio. */
export function project(
  points: Point3[],
  yaw: number,
  pitch: number,
  width: number,
  height: number,
  margin = 20,
): Projected[] {
  const rotated = points.map((p) => rotate(p, yaw, pitch));
  let maxAbs = 0;
  for (const p of rotated) {
    maxAbs = Math.max(maxAbs, Math.abs(p.x), Math.abs(p.y), Math.abs(p.z));
  }
  const halfSpan = Math.min(width, height) / 2 - margin;
  const scale = maxAbs > 0 ? halfSpan / maxAbs : 1;
  return rotated.map((p) => ({
    screenX: width / 2 + p.x * scale,
    screenY: height / 2 - p.y * scale,
    depth: p.z,
  }));
}

export function norm(point: Point3): number {
  return Math.sqrt(point.x ** 2 + point.y ** 2 + point.z ** 2);
}
