// Package server exposes a tiny health endpoint.
package server

import (
	"encoding/json"
	"fmt"
	"net/http"
)

import "time"

type status struct {
	Up    bool   `json:"up"`
	Since string `json:"since"`
}

var started = time.Now()

// Health reports liveness.
func Health(w http.ResponseWriter, r *http.Request) {
	json.NewEncoder(w).Encode(status{Up: true, Since: started.Format(time.RFC3339)})
}

func (s status) String() string {
	return fmt.Sprintf("up=%v", s.Up)
}

func Listen(addr string) error {
	http.HandleFunc("/health", Health)
	return http.ListenAndServe(addr, nil)
}
