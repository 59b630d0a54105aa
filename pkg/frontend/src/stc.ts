/**
 * Space-time cube scene: a 2.5D orbitable view with the map plane at the
 * bottom and time rising upward. Each frame becomes one point cloud (2n
 * points: pickups blue, dropoffs red, with brush/highlight emphasis); an
 * optional projection pass adds, per visible point, one floor point on the
 * map plane and one wall point at the back of the cube.
 */

import * as THREE from "three";

import { pointColor } from "./colors.js";
import { PointFrame, PointStatus } from "./pointbuffer.js";

export interface StcOptions {
  /** Cube edge length in scene units; normalized frame coords scale to it. */
  size: number;
  height: number;
  pointSize: number;
  showProjections: boolean;
  /** Render filtered-out points dimmed (true) or hide them (false). */
  showFiltered: boolean;
}

export const DEFAULT_OPTIONS: StcOptions = {
  size: 100,
  height: 60,
  pointSize: 1.2,
  showProjections: false,
  showFiltered: true,
};

export class StcScene {
  readonly group = new THREE.Group();
  private cloud: THREE.Points | null = null;
  private floorProjection: THREE.Points | null = null;
  private wallProjection: THREE.Points | null = null;
  private lastFrame: PointFrame | null = null;

  constructor(public options: StcOptions = { ...DEFAULT_OPTIONS }) {}

  /** Rebuild the cloud (and projections) from a decoded frame. */
  update(frame: PointFrame): void {
    this.lastFrame = frame;
    this.disposeChildren();
    const count = 2 * frame.n;
    if (count === 0) return;

    const keep: number[] = [];
    for (let i = 0; i < count; i++) {
      if (this.options.showFiltered || frame.status[i] !== PointStatus.FilteredOut) keep.push(i);
    }
    if (keep.length === 0) return;

    const positions = new Float32Array(keep.length * 3);
    const colors = new Float32Array(keep.length * 3);
    const { size, height } = this.options;
    keep.forEach((pointIndex, slot) => {
      positions[slot * 3] = frame.x[pointIndex] * size;
      positions[slot * 3 + 1] = frame.t[pointIndex] * height;
      positions[slot * 3 + 2] = frame.y[pointIndex] * size;
      const [r, g, b] = pointColor(
        frame.status[pointIndex] as PointStatus,
        pointIndex < frame.n,
        frame.color[pointIndex],
      );
      colors[slot * 3] = r;
      colors[slot * 3 + 1] = g;
      colors[slot * 3 + 2] = b;
    });
    this.cloud = this.makePoints(positions, colors, this.options.pointSize);
    this.group.add(this.cloud);

    if (this.options.showProjections) this.buildProjections(frame);
  }

  /** Floor and wall shadows for every visible (non-filtered) point. */
  private buildProjections(frame: PointFrame): void {
    const visible: number[] = [];
    for (let i = 0; i < 2 * frame.n; i++) {
      if (frame.status[i] !== PointStatus.FilteredOut) visible.push(i);
    }
    if (visible.length === 0) return;
    const { size, height } = this.options;
    const floor = new Float32Array(visible.length * 3);
    const wall = new Float32Array(visible.length * 3);
    const colors = new Float32Array(visible.length * 3);
    visible.forEach((pointIndex, slot) => {
      floor[slot * 3] = frame.x[pointIndex] * size;
      floor[slot * 3 + 1] = 0;
      floor[slot * 3 + 2] = frame.y[pointIndex] * size;
      wall[slot * 3] = frame.x[pointIndex] * size;
      wall[slot * 3 + 1] = frame.t[pointIndex] * height;
      wall[slot * 3 + 2] = size; // back wall of the cube
      const [r, g, b] = pointColor(frame.status[pointIndex] as PointStatus, pointIndex < frame.n, frame.color[pointIndex]);
      colors[slot * 3] = r * 0.5;
      colors[slot * 3 + 1] = g * 0.5;
      colors[slot * 3 + 2] = b * 0.5;
    });
    this.floorProjection = this.makePoints(floor, colors, this.options.pointSize * 0.8);
    this.wallProjection = this.makePoints(wall, colors.slice(), this.options.pointSize * 0.8);
    this.group.add(this.floorProjection, this.wallProjection);
  }

  private makePoints(positions: Float32Array, colors: Float32Array, size: number): THREE.Points {
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
    geometry.setAttribute("color", new THREE.BufferAttribute(colors, 3));
    const material = new THREE.PointsMaterial({ size, vertexColors: true, sizeAttenuation: false });
    return new THREE.Points(geometry, material);
  }

  setProjections(enabled: boolean): void {
    this.options.showProjections = enabled;
    if (this.lastFrame) this.update(this.lastFrame);
  }

  /** Total rendered point primitives across cloud and projections. */
  primitiveCount(): number {
    let total = 0;
    for (const points of [this.cloud, this.floorProjection, this.wallProjection]) {
      if (points) total += points.geometry.getAttribute("position").count;
    }
    return total;
  }

  visiblePointCount(): number {
    if (!this.lastFrame) return 0;
    let visible = 0;
    for (let i = 0; i < 2 * this.lastFrame.n; i++) {
      if (this.lastFrame.status[i] !== PointStatus.FilteredOut) visible++;
    }
    return visible;
  }

  private disposeChildren(): void {
    for (const points of [this.cloud, this.floorProjection, this.wallProjection]) {
      if (!points) continue;
      this.group.remove(points);
      points.geometry.dispose();
      (points.material as THREE.Material).dispose();
    }
    this.cloud = this.floorProjection = this.wallProjection = null;
  }
}
